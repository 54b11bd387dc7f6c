#pragma once

#include <openssl/evp.h>

#include <filesystem>
#include <fstream>
#include <iterator>
#include <map>
#include <sstream>
#include <string>
#include <vector>

#include "nbres/errors.hpp"
#include "nbres/io/strict_json.hpp"

#ifndef NBRES_VERSION
#define NBRES_VERSION "0.0.0"
#endif

namespace nbres::io {

inline std::string read_file(const std::string& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw ParseError(path, 0, "cannot open file");
    return {std::istreambuf_iterator<char>(in), std::istreambuf_iterator<char>()};
}

inline std::string sha256_hex(const std::string& data) {
    unsigned char md[EVP_MAX_MD_SIZE];
    unsigned int len = 0;
    if (EVP_Digest(data.data(), data.size(), md, &len, EVP_sha256(), nullptr) != 1)
        throw Error("sha256 digest failed");
    static const char* hex = "0123456789abcdef";
    std::string out;
    for (unsigned int i = 0; i < len; ++i) {
        out += hex[md[i] >> 4];
        out += hex[md[i] & 0xf];
    }
    return out;
}

/// Everything a command produced. Keys are sorted by the json type and no
/// wall-clock data is stored, so equal inputs give byte-equal files.
class RunReport {
public:
    explicit RunReport(std::string command) : command_(std::move(command)) {}

    // Inputs are recorded by file name (not full path) plus content digest.
    void add_input(const std::string& path) {
        const std::string name = std::filesystem::path(path).filename().string();
        inputs_[name] = sha256_hex(read_file(path));
    }

    // Recorded so (inputs, seed) fully identifies a run even for commands that draw no random numbers.
    void set_seed(unsigned seed) { seed_ = seed; }

    void warn(const std::string& w) { warnings_.push_back(w); }
    void warn_all(const std::vector<std::string>& ws) {
        for (const auto& w : ws) warn(w);
    }

    json& results() { return results_; }
    const std::vector<std::string>& warnings() const { return warnings_; }

    json to_json() const {
        json j;
        j["command"] = command_;
        j["toolkit_version"] = NBRES_VERSION;
        j["inputs"] = inputs_;
        j["results"] = results_;
        j["seed"] = seed_;
        j["warnings"] = warnings_;
        return j;
    }

    std::string dump() const { return to_json().dump(2) + "\n"; }

    void write(const std::string& path) const { write_text(path, dump()); }

    static void write_text(const std::string& path, const std::string& text) {
        const auto parent = std::filesystem::path(path).parent_path();
        if (!parent.empty()) std::filesystem::create_directories(parent);
        std::ofstream out(path, std::ios::binary);
        if (!out) throw Error("cannot write " + path);
        out << text;
    }

private:
    std::string command_;
    std::map<std::string, std::string> inputs_;
    json results_ = json::object();
    unsigned seed_ = 0;
    std::vector<std::string> warnings_;
};

/// Reads a report another stage wrote; missing file is a dependency error.
inline json load_stage(const std::string& dir, const std::string& stage, const std::string& file) {
    const std::filesystem::path p = std::filesystem::path(dir) / file;
    if (!std::filesystem::exists(p))
        throw DependencyError(stage, "missing '" + stage + "' output " + p.string() + "; run that stage first");
    try {
        return json::parse(read_file(p.string()));
    } catch (const json::parse_error& e) {
        throw ParseError(p.string(), 0, e.what());
    }
}

}  // namespace nbres::io
