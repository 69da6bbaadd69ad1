#pragma once

#include "conceptscope/model.hpp"

#include <cstdint>
#include <stdexcept>
#include <string>
#include <vector>

namespace conceptscope {

class CheckpointError : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

// Binary layout, all integers little-endian:
//   "CSCP" u32 version
//   u32 header_len, JSON header {config, world_seed, vocab}
//   u32 n_tensors, then per tensor:
//     u32 name_len, name, u32 dtype (0 = f32), u32 ndim, u64 dims[ndim], payload
struct Checkpoint {
    ModelConfig config;
    std::vector<std::string> vocab_tokens;
    ParamSet params;
    nlohmann::json extra = nlohmann::json::object();
};

inline constexpr std::uint32_t kCheckpointVersion = 1;

void save_checkpoint(const std::string & path, const Checkpoint & ckpt);
Checkpoint load_checkpoint(const std::string & path);

// Reads only the JSON header.
nlohmann::json read_checkpoint_header(const std::string & path);

} // namespace conceptscope
