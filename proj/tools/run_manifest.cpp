#include "run_manifest.hpp"

#include "rfod/error.hpp"

#include <openssl/evp.h>

#include <algorithm>
#include <fstream>
#include <memory>

namespace rfod::cli {

namespace {

std::string to_hex(const unsigned char* data, unsigned len) {
    static const char* digits = "0123456789abcdef";
    std::string out;
    out.reserve(2 * len);
    for (unsigned i = 0; i < len; ++i) {
        out.push_back(digits[data[i] >> 4]);
        out.push_back(digits[data[i] & 0xF]);
    }
    return out;
}

class Sha256 {
public:
    Sha256() : ctx_(EVP_MD_CTX_new(), EVP_MD_CTX_free) {
        if (!ctx_ || EVP_DigestInit_ex(ctx_.get(), EVP_sha256(), nullptr) != 1) throw Error("sha256 init failed");
    }
    void update(const void* data, std::size_t len) { EVP_DigestUpdate(ctx_.get(), data, len); }
    std::string hex() {
        unsigned char md[EVP_MAX_MD_SIZE];
        unsigned len = 0;
        EVP_DigestFinal_ex(ctx_.get(), md, &len);
        return to_hex(md, len);
    }

private:
    std::unique_ptr<EVP_MD_CTX, decltype(&EVP_MD_CTX_free)> ctx_;
};

void hash_stream(Sha256& h, const std::filesystem::path& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw InputError("cannot open " + path.string());
    char buf[1 << 16];
    while (in) {
        in.read(buf, sizeof buf);
        if (in.gcount() > 0) h.update(buf, static_cast<std::size_t>(in.gcount()));
    }
}

}  // namespace

std::string sha256_hex(std::string_view bytes) {
    Sha256 h;
    h.update(bytes.data(), bytes.size());
    return h.hex();
}

std::string sha256_file(const std::filesystem::path& path) {
    Sha256 h;
    hash_stream(h, path);
    return h.hex();
}

void RunManifest::add_input(const std::filesystem::path& path) {
    input_digests[path.string()] = sha256_file(path);
}

void RunManifest::add_input_dir(const std::filesystem::path& dir) {
    std::vector<std::filesystem::path> files;
    for (const auto& e : std::filesystem::directory_iterator(dir))
        if (e.is_regular_file() && e.path().filename() != "run_manifest.json") files.push_back(e.path());
    std::sort(files.begin(), files.end());
    Sha256 h;
    for (const auto& f : files) {
        const auto name = f.filename().string();
        h.update(name.data(), name.size() + 1);
        hash_stream(h, f);
    }
    input_digests[dir.string()] = h.hex();
}

nlohmann::json RunManifest::to_json() const {
    return {{"format", "rfod-run"},
            {"version", kRunManifestVersion},
            {"command", command},
            {"argv", argv},
            {"config", config},
            {"seed", seed},
            {"inputs", input_digests},
            {"outputs", outputs},
            {"timings", timings}};
}

void RunManifest::write(const std::filesystem::path& path) const {
    std::ofstream out(path);
    if (!out) throw InputError("cannot write " + path.string());
    out << to_json().dump(2) << '\n';
}

}  // namespace rfod::cli
