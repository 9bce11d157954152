#pragma once

#include <filesystem>
#include <string>
#include <vector>

namespace rega {

std::string sha256_hex(const std::string& bytes);
std::string sha256_file(const std::filesystem::path& path);

// Writes "<name>: <sha256>" for every listed file as a JSON document; used to
// check byte-for-byte reproducibility of pipeline outputs.
void write_manifest(const std::vector<std::filesystem::path>& files,
                    const std::filesystem::path& manifest_path);

} // namespace rega
