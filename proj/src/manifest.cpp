#include "rega/manifest.hpp"

#include "rega/error.hpp"

#include <fstream>
#include <json.hpp>
#include <openssl/evp.h>
#include <sstream>

namespace rega {

std::string sha256_hex(const std::string& bytes) {
    unsigned char digest[EVP_MAX_MD_SIZE];
    unsigned int len = 0;
    if (EVP_Digest(bytes.data(), bytes.size(), digest, &len, EVP_sha256(), nullptr) != 1) {
        throw IoError("sha256 digest failed");
    }
    static const char* hex = "0123456789abcdef";
    std::string out;
    out.reserve(2 * len);
    for (unsigned int i = 0; i < len; ++i) {
        out.push_back(hex[digest[i] >> 4]);
        out.push_back(hex[digest[i] & 0x0F]);
    }
    return out;
}

std::string sha256_file(const std::filesystem::path& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw IoError("cannot open '" + path.string() + "'");
    std::ostringstream buffer;
    buffer << in.rdbuf();
    return sha256_hex(buffer.str());
}

void write_manifest(const std::vector<std::filesystem::path>& files,
                    const std::filesystem::path& manifest_path) {
    nlohmann::json j;
    j["files"] = nlohmann::json::object();
    for (const auto& f : files) {
        j["files"][f.filename().string()] = sha256_file(f);
    }
    std::ofstream out(manifest_path, std::ios::binary | std::ios::trunc);
    if (!out) throw IoError("cannot write '" + manifest_path.string() + "'");
    out << j.dump(2) << '\n';
}

} // namespace rega
