#include "ftpl/text_io.hpp"

#include <openssl/evp.h>

#include <charconv>
#include <fstream>
#include <iomanip>
#include <sstream>

#include "ftpl/errors.hpp"

namespace ftpl::io {

std::string sha256_hex(const std::string& bytes) {
  unsigned char digest[EVP_MAX_MD_SIZE];
  unsigned int length = 0;
  if (EVP_Digest(bytes.data(), bytes.size(), digest, &length, EVP_sha256(), nullptr) != 1)
    throw NumericalError("SHA-256 digest failed");
  std::ostringstream os;
  for (unsigned int i = 0; i < length; ++i)
    os << std::hex << std::setw(2) << std::setfill('0') << int(digest[i]);
  return os.str();
}

std::string read_file(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw IoError("cannot open '" + path + "'");
  std::ostringstream os;
  os << in.rdbuf();
  return os.str();
}

void write_file(const std::string& path, const std::string& contents) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw IoError("cannot write '" + path + "'");
  out << contents;
  if (!out) throw IoError("write failed for '" + path + "'");
}

std::string format_number(double value) {
  char buf[64];
  const auto result = std::to_chars(buf, buf + sizeof(buf), value);
  return std::string(buf, result.ptr);
}

namespace {

std::string trim(const std::string& s) {
  const auto first = s.find_first_not_of(" \t\r");
  if (first == std::string::npos) return {};
  return s.substr(first, s.find_last_not_of(" \t\r") - first + 1);
}

}  // namespace

CommentedTable parse_commented_table(const std::string& text) {
  CommentedTable table;
  std::istringstream in(text);
  std::string line;
  int line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    const std::string t = trim(line);
    if (t.empty()) continue;
    if (t.front() == '#') {
      const auto eq = t.find('=');
      if (eq != std::string::npos)
        table.metadata[trim(t.substr(1, eq - 1))] = trim(t.substr(eq + 1));
      continue;
    }
    std::vector<std::string> fields;
    std::stringstream ls(t);
    std::string field;
    while (std::getline(ls, field, ',')) fields.push_back(trim(field));
    if (table.columns.empty()) {
      table.columns = fields;
      continue;
    }
    if (fields.size() != table.columns.size())
      throw FormatError("line " + std::to_string(line_no) + ": expected " +
                        std::to_string(table.columns.size()) + " columns");
    std::vector<double> row;
    for (const auto& f : fields) {
      double v = 0;
      const auto r = std::from_chars(f.data(), f.data() + f.size(), v);
      if (r.ec != std::errc() || r.ptr != f.data() + f.size())
        throw FormatError("line " + std::to_string(line_no) + ": bad number '" + f + "'");
      row.push_back(v);
    }
    table.rows.push_back(std::move(row));
  }
  if (table.columns.empty()) throw FormatError("table has no column header");
  return table;
}

double metadata_number(const CommentedTable& table, const std::string& key) {
  const auto it = table.metadata.find(key);
  if (it == table.metadata.end()) throw FormatError("missing metadata key '" + key + "'");
  try {
    return std::stod(it->second);
  } catch (const std::exception&) {
    throw FormatError("metadata key '" + key + "' is not a number");
  }
}

double metadata_number(const CommentedTable& table, const std::string& key, double fallback) {
  return table.metadata.count(key) ? metadata_number(table, key) : fallback;
}

}  // namespace ftpl::io
