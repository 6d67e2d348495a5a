#pragma once

#include <algorithm>
#include <cstdint>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <map>
#include <stdexcept>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

namespace plugid {

inline constexpr const char* kToolVersion = "0.1.0";

// FNV-1a, 64-bit: stable content fingerprints for corpora and outputs.
inline std::uint64_t fnv1a64(const void* data, std::size_t size, std::uint64_t hash = 0xcbf29ce484222325ull) {
    const auto* bytes = static_cast<const unsigned char*>(data);
    for (std::size_t k = 0; k < size; ++k) {
        hash ^= bytes[k];
        hash *= 0x100000001b3ull;
    }
    return hash;
}

inline std::uint64_t fnv1a64_file(const std::string& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) {
        throw std::runtime_error("digest: cannot open '" + path + "'");
    }
    std::uint64_t hash = 0xcbf29ce484222325ull;
    char buf[1 << 16];
    while (in.read(buf, sizeof(buf)) || in.gcount() > 0) {
        hash = fnv1a64(buf, static_cast<std::size_t>(in.gcount()), hash);
    }
    return hash;
}

inline std::string hex64(std::uint64_t value) {
    char buf[17];
    std::snprintf(buf, sizeof(buf), "%016llx", static_cast<unsigned long long>(value));
    return buf;
}

// Order-independent directory digest: per-file digests combined over the
// sorted relative paths.
inline std::string digest_directory(const std::string& dir) {
    namespace fs = std::filesystem;
    std::vector<std::string> rel;
    for (const auto& entry : fs::recursive_directory_iterator(dir)) {
        if (entry.is_regular_file()) {
            rel.push_back(fs::relative(entry.path(), dir).generic_string());
        }
    }
    std::sort(rel.begin(), rel.end());
    std::string combined;
    for (const auto& r : rel) {
        combined += r + ":" + hex64(fnv1a64_file((fs::path(dir) / r).string())) + "\n";
    }
    return hex64(fnv1a64(combined.data(), combined.size()));
}

// Everything needed to re-run an invocation bit-identically: the command,
// its full configuration, the input digest, and (informationally) timings.
struct RunManifest {
    std::string command;
    nlohmann::json config;
    std::string input_digest;
    std::map<std::string, std::string> output_digests;
    double elapsed_seconds = 0.0;
    int jobs = 1;

    nlohmann::json to_json() const {
        nlohmann::json j;
        j["tool_version"] = kToolVersion;
        j["command"] = command;
        j["config"] = config;
        j["input_digest"] = input_digest;
        j["output_digests"] = output_digests;
        j["jobs"] = jobs;
        j["elapsed_seconds"] = elapsed_seconds;
        return j;
    }

    void save(const std::string& path) const {
        std::ofstream out(path, std::ios::trunc);
        if (!out) {
            throw std::runtime_error("manifest: cannot write '" + path + "'");
        }
        out << to_json().dump(1) << "\n";
    }
};

}  // namespace plugid
