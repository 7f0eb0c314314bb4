#pragma once

#include <cstdint>
#include <filesystem>
#include <string>
#include <string_view>

#include <nlohmann/json.hpp>

#include "nar/core/bytes.hpp"
#include "nar/core/error.hpp"
#include "nar/core/hash.hpp"
#include "nar/numerics/params.hpp"

namespace nar {

inline constexpr int kCheckpointFormatVersion = 1;
inline constexpr char kCheckpointMagic[8] = {'N', 'A', 'R', 'C', 'K', 'P', 'T', '\n'};

struct Checkpoint {
    ParamTable params;
    nlohmann::json config = nlohmann::json::object();
    std::uint64_t seed = 0;

    bool operator==(const Checkpoint&) const = default;
};

inline std::string serialize_checkpoint(const Checkpoint& ck) {
    using nlohmann::json;
    json tensors = json::array();
    detail::ByteWriter payload;
    for (const auto& e : ck.params.entries()) {
        tensors.push_back({{"name", e.name}, {"partition", e.partition}, {"shape", e.value.shape()}});
        for (double x : e.value.data()) payload.f64(x);
    }
    const json header = {{"format", "narckpt"},
                         {"version", kCheckpointFormatVersion},
                         {"seed", ck.seed},
                         {"config", ck.config},
                         {"tensors", tensors},
                         {"payload_bytes", payload.str().size()}};
    const std::string text = header.dump();
    detail::ByteWriter out;
    out.raw(std::string_view(kCheckpointMagic, sizeof kCheckpointMagic));
    out.u64(text.size());
    out.raw(text);
    out.raw(payload.str());
    return std::move(out.str());
}

inline Checkpoint deserialize_checkpoint(std::string_view bytes, const std::string& what = "checkpoint") {
    detail::ByteReader r(bytes, what);
    if (r.raw(sizeof kCheckpointMagic) != std::string_view(kCheckpointMagic, sizeof kCheckpointMagic)) {
        throw FormatError(what + ": not a checkpoint file");
    }
    const auto len = r.u64();
    nlohmann::json header;
    try {
        header = nlohmann::json::parse(r.raw(len));
    } catch (const nlohmann::json::parse_error& e) {
        throw FormatError(what + ": corrupt header: " + e.what());
    }
    const int version = header.value("version", -1);
    if (version != kCheckpointFormatVersion) {
        throw FormatError(what + ": unsupported checkpoint version " + std::to_string(version));
    }
    Checkpoint ck;
    ck.seed = header.at("seed").get<std::uint64_t>();
    ck.config = header.at("config");
    for (const auto& t : header.at("tensors")) {
        Tensor v(t.at("shape").get<Shape>());
        for (auto& x : v.data()) x = r.f64();
        ck.params.add(t.at("name").get<std::string>(), t.at("partition").get<std::string>(), std::move(v));
    }
    return ck;
}

inline void save_checkpoint(const Checkpoint& ck, const std::filesystem::path& path) {
    write_file(path, serialize_checkpoint(ck));
}

inline Checkpoint load_checkpoint(const std::filesystem::path& path) {
    if (!std::filesystem::exists(path)) throw IoError("checkpoint not found: " + path.string());
    return deserialize_checkpoint(read_file(path), path.string());
}

/// Content hash of the parameter tensors only (names, shapes, values).
inline std::uint64_t params_digest(const ParamTable& p) {
    Checkpoint ck;
    ck.params = p;
    return hash_bytes(serialize_checkpoint(ck));
}

}  // namespace nar
