#pragma once

#include <map>
#include <string>
#include <vector>

namespace ftpl::io {

std::string sha256_hex(const std::string& bytes);

std::string read_file(const std::string& path);
void write_file(const std::string& path, const std::string& contents);

// Shortest round-trip decimal representation.
std::string format_number(double value);

// Comment-prefixed `key=value` metadata followed by a CSV body whose first
// non-comment line is the column header.
struct CommentedTable {
  std::map<std::string, std::string> metadata;
  std::vector<std::string> columns;
  std::vector<std::vector<double>> rows;
};

CommentedTable parse_commented_table(const std::string& text);

double metadata_number(const CommentedTable& table, const std::string& key);
double metadata_number(const CommentedTable& table, const std::string& key, double fallback);

}  // namespace ftpl::io
