#include "aya/common/hash.hpp"

#include "aya/common/error.hpp"

#include <openssl/evp.h>

#include <array>
#include <fstream>
#include <memory>
#include <sstream>

namespace aya {
namespace {

std::string digest_hex(const EVP_MD* md, std::string_view prefix, std::string_view bytes)
{
    std::unique_ptr<EVP_MD_CTX, decltype(&EVP_MD_CTX_free)> ctx(EVP_MD_CTX_new(), &EVP_MD_CTX_free);
    if (!ctx || EVP_DigestInit_ex(ctx.get(), md, nullptr) != 1
        || EVP_DigestUpdate(ctx.get(), prefix.data(), prefix.size()) != 1
        || EVP_DigestUpdate(ctx.get(), bytes.data(), bytes.size()) != 1) {
        throw InternalError("digest_failed", "OpenSSL digest initialisation failed");
    }
    std::array<unsigned char, EVP_MAX_MD_SIZE> out{};
    unsigned int len = 0;
    if (EVP_DigestFinal_ex(ctx.get(), out.data(), &len) != 1) {
        throw InternalError("digest_failed", "OpenSSL digest finalisation failed");
    }
    static constexpr char hex[] = "0123456789abcdef";
    std::string result;
    result.reserve(len * 2);
    for (unsigned int i = 0; i < len; ++i) {
        result.push_back(hex[out[i] >> 4]);
        result.push_back(hex[out[i] & 0xF]);
    }
    return result;
}

} // namespace

std::string sha256_hex(std::string_view bytes)
{
    return digest_hex(EVP_sha256(), {}, bytes);
}

std::string git_blob_hash(std::string_view bytes)
{
    std::string header = "blob " + std::to_string(bytes.size());
    header.push_back('\0');
    return digest_hex(EVP_sha1(), header, bytes);
}

std::string git_blob_hash_file(const std::filesystem::path& path)
{
    return git_blob_hash(read_file(path));
}

std::uint64_t fnv1a64(std::string_view bytes, std::uint64_t seed)
{
    std::uint64_t h = seed;
    for (unsigned char c : bytes) {
        h ^= c;
        h *= 0x100000001b3ULL;
    }
    return h;
}

std::string read_file(const std::filesystem::path& path)
{
    std::ifstream in(path, std::ios::binary);
    if (!in) {
        throw InputError("file_not_found", "cannot open " + path.string());
    }
    std::ostringstream ss;
    ss << in.rdbuf();
    return ss.str();
}

void write_file(const std::filesystem::path& path, std::string_view bytes)
{
    if (path.has_parent_path()) {
        std::filesystem::create_directories(path.parent_path());
    }
    std::ofstream out(path, std::ios::binary | std::ios::trunc);
    if (!out) {
        throw InputError("write_failed", "cannot write " + path.string());
    }
    out.write(bytes.data(), static_cast<std::streamsize>(bytes.size()));
    if (!out) {
        throw InputError("write_failed", "short write to " + path.string());
    }
}

} // namespace aya
