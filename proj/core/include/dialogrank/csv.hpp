#pragma once

#include <iosfwd>
#include <string>
#include <vector>

namespace dialogrank {

// RFC 4180 CSV. Quoted fields may contain commas, doubled quotes and
// newlines. The reader accepts LF and CRLF endings; the writer emits LF.
class CsvReader {
 public:
  explicit CsvReader(std::istream& in) : in_(in) {}

  // Reads one record. Returns false on clean end of input. Throws ParseError
  // (with the record's starting line) on a stray or unterminated quote.
  bool next(std::vector<std::string>& fields);

  // 1-based line where the last returned record started.
  std::size_t line() const { return record_line_; }

 private:
  std::istream& in_;
  std::size_t line_ = 1;
  std::size_t record_line_ = 0;
};

void write_csv_row(std::ostream& out, const std::vector<std::string>& fields);

std::string csv_escape(const std::string& field);

}  // namespace dialogrank
