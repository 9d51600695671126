#pragma once

#include <string>

namespace tfhtmm {

/// Whole-file read; throws IoError naming the path.
std::string read_text_file(const std::string& path);

/// Writes to a sibling temporary file, then renames over `path`.
void write_text_file_atomic(const std::string& path, const std::string& content);

}  // namespace tfhtmm
