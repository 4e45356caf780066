#pragma once

#include <filesystem>
#include <string>
#include <string_view>

namespace brickscan {

std::string read_text_file(const std::filesystem::path& path);
/// Creates parent directories as needed.
void write_text_file(const std::filesystem::path& path, std::string_view text);

}  // namespace brickscan
