#pragma once

#include <cstddef>
#include <cstdint>
#include <span>
#include <string>
#include <vector>

#include <Eigen/Core>

namespace conceptscope {

// Float storage with a fixed base alignment so vectorised reductions sum in
// the same order regardless of where the allocator places the buffer.
using FloatBuffer = std::vector<float, Eigen::aligned_allocator<float>>;

// Named f32 tensor with a row-major shape.
struct Tensor {
    std::string name;
    std::vector<std::int64_t> shape;
    FloatBuffer data;

    std::size_t numel() const;
    friend bool operator==(const Tensor &, const Tensor &) = default;
};

// Ordered collection of named tensors; order is the serialization order.
class ParamSet {
public:
    Tensor & add(std::string name, std::vector<std::int64_t> shape, float fill = 0.0f);

    Tensor & at(const std::string & name);
    const Tensor & at(const std::string & name) const;
    bool contains(const std::string & name) const;

    std::vector<Tensor> & tensors() { return tensors_; }
    const std::vector<Tensor> & tensors() const { return tensors_; }

    // Same names and shapes, zero-filled.
    ParamSet zeros_like() const;
    void fill(float v);

    std::size_t numel() const;

    friend bool operator==(const ParamSet &, const ParamSet &) = default;

private:
    std::vector<Tensor> tensors_;
};

} // namespace conceptscope
