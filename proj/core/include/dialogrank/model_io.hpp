#pragma once

#include <cstdint>
#include <filesystem>
#include <string>
#include <vector>

#include "dialogrank/ranking.hpp"
#include "dialogrank/scorer.hpp"

namespace dialogrank {

// Binary model container. Little-endian throughout:
//   magic "DRNK", u32 version, u8 arch, u8 shared, u8 activation, u8 zero,
//   u64 vocabulary checksum (FNV-1a over the vocabulary file bytes),
//   u32 vocab size, u32 embedding dim, u32 d_c, u32 d_r,
//   architecture dims (cnn: group count + width/count pairs; lstm/bilstm:
//   hidden size), then the parameter payload as IEEE-754 f32 in fixed order:
//   embeddings, context encoder tensors in declaration order, response
//   encoder tensors (separate mode only), M, b.
constexpr std::uint32_t kModelFormatVersion = 1;

std::uint64_t fnv1a_file(const std::filesystem::path& path);

// Refuses to save non-finite parameters.
void save_model(const DualEncoderModel& model, const std::filesystem::path& path,
                std::uint64_t vocab_checksum);

// Verifies magic, version and vocabulary checksum; the payload length must
// exactly match the declared dimensions.
DualEncoderModel load_model(const std::filesystem::path& path, std::uint64_t vocab_checksum);

// One member model path per line; blank lines and '#' comments are skipped.
std::vector<std::filesystem::path> read_manifest(const std::filesystem::path& path);

Ensemble load_ensemble(const std::filesystem::path& manifest, std::uint64_t vocab_checksum);

}  // namespace dialogrank
