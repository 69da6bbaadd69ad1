#include "conceptscope/tensor.hpp"

#include <algorithm>
#include <stdexcept>

namespace conceptscope {

std::size_t Tensor::numel() const {
    std::size_t n = 1;
    for (auto d : shape) {
        n *= static_cast<std::size_t>(d);
    }
    return n;
}

Tensor & ParamSet::add(std::string name, std::vector<std::int64_t> shape, float fill) {
    if (contains(name)) {
        throw std::invalid_argument("duplicate tensor name: " + name);
    }
    Tensor t;
    t.name = std::move(name);
    t.shape = std::move(shape);
    t.data.assign(t.numel(), fill);
    tensors_.push_back(std::move(t));
    return tensors_.back();
}

Tensor & ParamSet::at(const std::string & name) {
    for (auto & t : tensors_) {
        if (t.name == name) {
            return t;
        }
    }
    throw std::out_of_range("no tensor named " + name);
}

const Tensor & ParamSet::at(const std::string & name) const {
    return const_cast<ParamSet *>(this)->at(name);
}

bool ParamSet::contains(const std::string & name) const {
    return std::any_of(tensors_.begin(), tensors_.end(), [&](const Tensor & t) { return t.name == name; });
}

ParamSet ParamSet::zeros_like() const {
    ParamSet out;
    for (const auto & t : tensors_) {
        out.add(t.name, t.shape, 0.0f);
    }
    return out;
}

void ParamSet::fill(float v) {
    for (auto & t : tensors_) {
        std::fill(t.data.begin(), t.data.end(), v);
    }
}

std::size_t ParamSet::numel() const {
    std::size_t n = 0;
    for (const auto & t : tensors_) {
        n += t.numel();
    }
    return n;
}

} // namespace conceptscope
