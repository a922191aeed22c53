#include "dialogrank/model_io.hpp"

#include <bit>
#include <cmath>
#include <cstring>
#include <fstream>

#include "dialogrank/errors.hpp"
#include "dialogrank/rng.hpp"

namespace dialogrank {

namespace {

constexpr char kMagic[4] = {'D', 'R', 'N', 'K'};

void write_bytes(std::ostream& out, const void* data, std::size_t n) {
  out.write(static_cast<const char*>(data), static_cast<std::streamsize>(n));
}

void write_u8(std::ostream& out, std::uint8_t v) { write_bytes(out, &v, 1); }

void write_u32(std::ostream& out, std::uint32_t v) {
  unsigned char b[4] = {static_cast<unsigned char>(v), static_cast<unsigned char>(v >> 8),
                        static_cast<unsigned char>(v >> 16), static_cast<unsigned char>(v >> 24)};
  write_bytes(out, b, 4);
}

void write_u64(std::ostream& out, std::uint64_t v) {
  write_u32(out, static_cast<std::uint32_t>(v));
  write_u32(out, static_cast<std::uint32_t>(v >> 32));
}

void write_f32(std::ostream& out, float v) {
  write_u32(out, std::bit_cast<std::uint32_t>(v));
}

std::uint8_t read_u8(std::istream& in) {
  char c;
  if (!in.get(c)) throw IoError("model file truncated");
  return static_cast<std::uint8_t>(c);
}

std::uint32_t read_u32(std::istream& in) {
  unsigned char b[4];
  if (!in.read(reinterpret_cast<char*>(b), 4)) throw IoError("model file truncated");
  return static_cast<std::uint32_t>(b[0]) | (static_cast<std::uint32_t>(b[1]) << 8) |
         (static_cast<std::uint32_t>(b[2]) << 16) | (static_cast<std::uint32_t>(b[3]) << 24);
}

std::uint64_t read_u64(std::istream& in) {
  const std::uint64_t lo = read_u32(in);
  const std::uint64_t hi = read_u32(in);
  return lo | (hi << 32);
}

float read_f32(std::istream& in) { return std::bit_cast<float>(read_u32(in)); }

void write_matrix(std::ostream& out, const Matrix& m, const std::string& name) {
  for (double v : m.data) {
    if (!std::isfinite(v))
      throw ValidationError("refusing to save non-finite value in " + name);
    write_f32(out, static_cast<float>(v));
  }
}

void read_matrix(std::istream& in, Matrix& m) {
  for (double& v : m.data) v = static_cast<double>(read_f32(in));
}

std::uint8_t arch_tag(Arch arch) {
  switch (arch) {
    case Arch::cnn: return 0;
    case Arch::lstm: return 1;
    case Arch::bilstm: return 2;
  }
  throw ValidationError("bad architecture");
}

Arch arch_from_tag(std::uint8_t tag) {
  switch (tag) {
    case 0: return Arch::cnn;
    case 1: return Arch::lstm;
    case 2: return Arch::bilstm;
  }
  throw ValidationError("model file has unknown architecture tag " + std::to_string(tag));
}

// Ordered parameter tensors of one encoder, matching the header layout.
std::vector<const Matrix*> encoder_tensors(const EncoderParams& params) {
  std::vector<const Matrix*> out;
  for (Parameter* p : encoder_parameters(const_cast<EncoderParams&>(params)))
    out.push_back(&p->value);
  return out;
}

}  // namespace

std::uint64_t fnv1a_file(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw IoError("cannot open " + path.string());
  std::uint64_t h = kFnvBasis;
  char buf[4096];
  while (in.read(buf, sizeof buf) || in.gcount() > 0) {
    h = fnv1a64(std::string_view(buf, static_cast<std::size_t>(in.gcount())), h);
    if (in.eof()) break;
  }
  return h;
}

void save_model(const DualEncoderModel& model, const std::filesystem::path& path,
                std::uint64_t vocab_checksum) {
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw IoError("cannot write " + path.string());
  write_bytes(out, kMagic, 4);
  write_u32(out, kModelFormatVersion);
  write_u8(out, arch_tag(model.arch));
  write_u8(out, model.shared() ? 1 : 0);
  std::uint8_t act = 0;
  if (const auto* cnn = std::get_if<CnnParams>(&model.context_encoder))
    act = cnn->activation == Nonlinearity::tanh ? 1 : 0;
  write_u8(out, act);
  write_u8(out, 0);
  write_u64(out, vocab_checksum);
  write_u32(out, static_cast<std::uint32_t>(model.vocab_size()));
  write_u32(out, static_cast<std::uint32_t>(model.embedding_dim()));
  write_u32(out, static_cast<std::uint32_t>(model.context_dim()));
  write_u32(out, static_cast<std::uint32_t>(model.response_dim()));

  if (const auto* cnn = std::get_if<CnnParams>(&model.context_encoder)) {
    write_u32(out, static_cast<std::uint32_t>(cnn->groups.size()));
    for (const auto& g : cnn->groups) {
      write_u32(out, static_cast<std::uint32_t>(g.width));
      write_u32(out, static_cast<std::uint32_t>(g.count()));
    }
  } else if (const auto* lstm = std::get_if<LstmParams>(&model.context_encoder)) {
    write_u32(out, static_cast<std::uint32_t>(lstm->hidden));
  } else {
    const auto& bi = std::get<BiLstmParams>(model.context_encoder);
    if (bi.forward.hidden != bi.backward.hidden)
      throw ValidationError("model file requires equal bilstm hidden sizes");
    write_u32(out, static_cast<std::uint32_t>(bi.forward.hidden));
  }

  write_matrix(out, model.embeddings.value, "embeddings");
  for (const Matrix* m : encoder_tensors(model.context_encoder))
    write_matrix(out, *m, "context encoder");
  if (!model.shared())
    for (const Matrix* m : encoder_tensors(*model.response_encoder))
      write_matrix(out, *m, "response encoder");
  write_matrix(out, model.bilinear.value, "bilinear");
  write_matrix(out, model.bias.value, "bias");
  if (!out) throw IoError("write failed for " + path.string());
}

DualEncoderModel load_model(const std::filesystem::path& path, std::uint64_t vocab_checksum) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw IoError("cannot open " + path.string());
  char magic[4];
  if (!in.read(magic, 4) || std::memcmp(magic, kMagic, 4) != 0)
    throw ValidationError("not a model file (bad magic): " + path.string());
  const std::uint32_t version = read_u32(in);
  if (version != kModelFormatVersion)
    throw ValidationError("unsupported model format version " + std::to_string(version));
  const Arch arch = arch_from_tag(read_u8(in));
  const bool shared = read_u8(in) != 0;
  const std::uint8_t act = read_u8(in);
  read_u8(in);  // reserved
  const std::uint64_t stored_checksum = read_u64(in);
  if (stored_checksum != vocab_checksum)
    throw ValidationError("vocabulary checksum mismatch for " + path.string() +
                          ": model was trained against a different vocabulary file");
  const std::uint32_t vocab_size = read_u32(in);
  const std::uint32_t dim = read_u32(in);
  const std::uint32_t d_c = read_u32(in);
  const std::uint32_t d_r = read_u32(in);
  if (vocab_size < 2 || dim < 1) throw ValidationError("model file has bad dimensions");

  auto build = [&]() -> EncoderParams {
    switch (arch) {
      case Arch::cnn: {
        const std::uint32_t n_groups = read_u32(in);
        if (n_groups == 0 || n_groups > 5) throw ValidationError("bad cnn group count");
        std::vector<std::pair<int, int>> filters;
        for (std::uint32_t g = 0; g < n_groups; ++g) {
          const int width = static_cast<int>(read_u32(in));
          const int count = static_cast<int>(read_u32(in));
          filters.emplace_back(width, count);
        }
        return make_cnn(static_cast<int>(dim), filters,
                        act == 1 ? Nonlinearity::tanh : Nonlinearity::relu);
      }
      case Arch::lstm:
        return make_lstm(static_cast<int>(dim), static_cast<int>(read_u32(in)));
      case Arch::bilstm:
        return make_bilstm(static_cast<int>(dim), static_cast<int>(read_u32(in)));
    }
    throw ValidationError("bad architecture");
  };

  DualEncoderModel model;
  model.arch = arch;
  model.embeddings = Parameter("embeddings", static_cast<int>(vocab_size), static_cast<int>(dim));
  model.context_encoder = build();
  for (Parameter* p : encoder_parameters(model.context_encoder)) p->name = "context." + p->name;
  if (!shared) {
    // Separate encoders share the architecture and dimensions.
    model.response_encoder = model.context_encoder;
    for (Parameter* p : encoder_parameters(*model.response_encoder))
      p->name = "response." + p->name.substr(std::string("context.").size());
  }
  if (static_cast<std::uint32_t>(model.context_dim()) != d_c ||
      static_cast<std::uint32_t>(model.response_dim()) != d_r)
    throw ValidationError("model file dimension header is inconsistent");
  model.bilinear = Parameter("bilinear", static_cast<int>(d_c), static_cast<int>(d_r));
  model.bias = Parameter("bias", 1, 1);

  read_matrix(in, model.embeddings.value);
  for (Parameter* p : encoder_parameters(model.context_encoder)) read_matrix(in, p->value);
  if (!shared)
    for (Parameter* p : encoder_parameters(*model.response_encoder)) read_matrix(in, p->value);
  read_matrix(in, model.bilinear.value);
  read_matrix(in, model.bias.value);

  char extra;
  if (in.get(extra))
    throw ValidationError("model file has trailing bytes: " + path.string());
  return model;
}

std::vector<std::filesystem::path> read_manifest(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw IoError("cannot open manifest " + path.string());
  std::vector<std::filesystem::path> out;
  std::string line;
  while (std::getline(in, line)) {
    if (!line.empty() && line.back() == '\r') line.pop_back();
    const auto hash = line.find('#');
    if (hash != std::string::npos) line.resize(hash);
    const auto first = line.find_first_not_of(" \t");
    if (first == std::string::npos) continue;
    const auto last = line.find_last_not_of(" \t");
    std::filesystem::path member(line.substr(first, last - first + 1));
    if (member.is_relative()) member = path.parent_path() / member;
    out.push_back(std::move(member));
  }
  if (out.empty()) throw ValidationError("ensemble manifest lists no models: " + path.string());
  return out;
}

Ensemble load_ensemble(const std::filesystem::path& manifest, std::uint64_t vocab_checksum) {
  Ensemble ensemble;
  for (const auto& member : read_manifest(manifest))
    ensemble.members.push_back(load_model(member, vocab_checksum));
  return ensemble;
}

}  // namespace dialogrank
