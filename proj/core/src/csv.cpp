#include "dialogrank/csv.hpp"

#include <istream>
#include <ostream>

#include "dialogrank/errors.hpp"

namespace dialogrank {

bool CsvReader::next(std::vector<std::string>& fields) {
  fields.clear();
  int c = in_.get();
  if (c == std::istream::traits_type::eof()) return false;
  record_line_ = line_;

  std::string field;
  bool quoted = false;
  bool field_started = false;  // saw a quote or any character in this field

  auto end_field = [&] {
    fields.push_back(field);
    field.clear();
    quoted = false;
    field_started = false;
  };

  while (true) {
    if (c == std::istream::traits_type::eof()) {
      if (quoted) throw ParseError("unterminated quoted field", record_line_);
      end_field();
      return true;
    }
    char ch = static_cast<char>(c);
    if (quoted) {
      if (ch == '"') {
        int peek = in_.get();
        if (peek == '"') {
          field += '"';
          c = in_.get();
          continue;
        }
        quoted = false;
        c = peek;
        continue;
      }
      if (ch == '\n') ++line_;
      field += ch;
      c = in_.get();
      continue;
    }
    switch (ch) {
      case '"':
        if (field_started || !field.empty())
          throw ParseError("stray quote inside unquoted field", record_line_);
        quoted = true;
        field_started = true;
        break;
      case ',':
        end_field();
        break;
      case '\r': {
        int peek = in_.get();
        if (peek != '\n' && peek != std::istream::traits_type::eof())
          throw ParseError("bare carriage return", record_line_);
        ++line_;
        end_field();
        return true;
      }
      case '\n':
        ++line_;
        end_field();
        return true;
      default:
        field += ch;
        field_started = true;
        break;
    }
    c = in_.get();
  }
}

std::string csv_escape(const std::string& field) {
  bool needs_quotes = field.find_first_of(",\"\r\n") != std::string::npos;
  if (!needs_quotes) return field;
  std::string out = "\"";
  for (char ch : field) {
    if (ch == '"') out += '"';
    out += ch;
  }
  out += '"';
  return out;
}

void write_csv_row(std::ostream& out, const std::vector<std::string>& fields) {
  for (std::size_t i = 0; i < fields.size(); ++i) {
    if (i) out << ',';
    out << csv_escape(fields[i]);
  }
  out << '\n';
}

}  // namespace dialogrank
