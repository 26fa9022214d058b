#pragma once

#include <filesystem>
#include <string>
#include <string_view>

namespace convgame {

std::string sha256_hex(std::string_view data);

/// Object id git would assign to `data` as a blob: SHA-1 over
/// "blob <size>\0" followed by the content.
std::string git_blob_sha1(std::string_view data);

std::string git_blob_sha1_file(const std::filesystem::path& path);

}  // namespace convgame
