#include "conceptscope/checkpoint.hpp"

#include <bit>
#include <cstring>
#include <fstream>
#include <sstream>

namespace conceptscope {

namespace {

static_assert(std::endian::native == std::endian::little, "checkpoint I/O assumes a little-endian host");

constexpr char kMagic[4] = {'C', 'S', 'C', 'P'};

template <typename T>
void put(std::ostream & os, T v) {
    os.write(reinterpret_cast<const char *>(&v), sizeof(T));
}

template <typename T>
T get(std::istream & is, const std::string & what) {
    T v{};
    if (!is.read(reinterpret_cast<char *>(&v), sizeof(T))) {
        throw CheckpointError("truncated checkpoint while reading " + what);
    }
    return v;
}

std::string get_bytes(std::istream & is, std::size_t n, const std::string & what) {
    std::string s(n, '\0');
    if (n > 0 && !is.read(s.data(), static_cast<std::streamsize>(n))) {
        throw CheckpointError("truncated checkpoint while reading " + what);
    }
    return s;
}

nlohmann::json read_header(std::istream & is) {
    char magic[4];
    if (!is.read(magic, 4) || std::memcmp(magic, kMagic, 4) != 0) {
        throw CheckpointError("not a checkpoint (bad magic)");
    }
    const auto version = get<std::uint32_t>(is, "version");
    if (version != kCheckpointVersion) {
        throw CheckpointError("unsupported checkpoint version " + std::to_string(version));
    }
    const auto len = get<std::uint32_t>(is, "header length");
    try {
        return nlohmann::json::parse(get_bytes(is, len, "header"));
    } catch (const nlohmann::json::parse_error & e) {
        throw CheckpointError(std::string("corrupt checkpoint header: ") + e.what());
    }
}

} // namespace

void save_checkpoint(const std::string & path, const Checkpoint & ckpt) {
    nlohmann::json header = {{"config", to_json(ckpt.config)},
                             {"world_seed", ckpt.config.world_seed},
                             {"vocab", ckpt.vocab_tokens},
                             {"extra", ckpt.extra}};
    const std::string hs = header.dump();

    std::ostringstream os(std::ios::binary);
    os.write(kMagic, 4);
    put<std::uint32_t>(os, kCheckpointVersion);
    put<std::uint32_t>(os, static_cast<std::uint32_t>(hs.size()));
    os.write(hs.data(), static_cast<std::streamsize>(hs.size()));
    put<std::uint32_t>(os, static_cast<std::uint32_t>(ckpt.params.tensors().size()));
    for (const auto & t : ckpt.params.tensors()) {
        put<std::uint32_t>(os, static_cast<std::uint32_t>(t.name.size()));
        os.write(t.name.data(), static_cast<std::streamsize>(t.name.size()));
        put<std::uint32_t>(os, 0);
        put<std::uint32_t>(os, static_cast<std::uint32_t>(t.shape.size()));
        for (auto d : t.shape) {
            put<std::uint64_t>(os, static_cast<std::uint64_t>(d));
        }
        os.write(reinterpret_cast<const char *>(t.data.data()),
                 static_cast<std::streamsize>(t.data.size() * sizeof(float)));
    }

    // Write-then-rename so a crash never leaves a half-written checkpoint.
    const std::string tmp = path + ".tmp";
    {
        std::ofstream f(tmp, std::ios::binary | std::ios::trunc);
        if (!f) {
            throw CheckpointError("cannot write " + tmp);
        }
        const std::string bytes = os.str();
        f.write(bytes.data(), static_cast<std::streamsize>(bytes.size()));
        if (!f) {
            throw CheckpointError("write failed for " + tmp);
        }
    }
    if (std::rename(tmp.c_str(), path.c_str()) != 0) {
        throw CheckpointError("cannot rename " + tmp + " to " + path);
    }
}

nlohmann::json read_checkpoint_header(const std::string & path) {
    std::ifstream f(path, std::ios::binary);
    if (!f) {
        throw CheckpointError("cannot open checkpoint " + path);
    }
    return read_header(f);
}

Checkpoint load_checkpoint(const std::string & path) {
    std::ifstream f(path, std::ios::binary);
    if (!f) {
        throw CheckpointError("cannot open checkpoint " + path);
    }
    const auto header = read_header(f);
    Checkpoint ck;
    try {
        ck.config = model_config_from_json(header.at("config"));
        ck.vocab_tokens = header.at("vocab").get<std::vector<std::string>>();
        ck.extra = header.value("extra", nlohmann::json::object());
    } catch (const nlohmann::json::exception & e) {
        throw CheckpointError(std::string("corrupt checkpoint header: ") + e.what());
    }
    const auto n = get<std::uint32_t>(f, "tensor count");
    for (std::uint32_t i = 0; i < n; ++i) {
        const auto name_len = get<std::uint32_t>(f, "tensor name length");
        std::string name = get_bytes(f, name_len, "tensor name");
        const auto dtype = get<std::uint32_t>(f, "dtype of " + name);
        if (dtype != 0) {
            throw CheckpointError("unsupported dtype " + std::to_string(dtype) + " for " + name);
        }
        const auto ndim = get<std::uint32_t>(f, "ndim of " + name);
        if (ndim > 8) {
            throw CheckpointError("implausible rank for " + name);
        }
        std::vector<std::int64_t> shape;
        for (std::uint32_t k = 0; k < ndim; ++k) {
            shape.push_back(static_cast<std::int64_t>(get<std::uint64_t>(f, "shape of " + name)));
        }
        Tensor & t = ck.params.add(name, shape);
        if (t.numel() > 0 &&
            !f.read(reinterpret_cast<char *>(t.data.data()), static_cast<std::streamsize>(t.numel() * sizeof(float)))) {
            throw CheckpointError("truncated payload for " + name);
        }
    }
    if (f.peek() != std::char_traits<char>::eof()) {
        throw CheckpointError("trailing bytes after last tensor");
    }
    return ck;
}

} // namespace conceptscope
