#pragma once

#include "aya/architecture/config.hpp"
#include "aya/numerics/tensor.hpp"

#include <cstddef>
#include <vector>

namespace aya::architecture {

using numerics::DType;
using numerics::Tensor;

// Per-layer key/value store shaped [n_kv_heads, capacity, d_head]. Only
// n_kv_heads rows per position are kept, which is where grouped-query
// attention saves memory relative to multi-head attention.
class KvCache {
public:
    KvCache(const ModelConfig& config, std::size_t capacity, DType dtype = DType::f32);

    std::size_t length() const noexcept { return length_; }
    std::size_t capacity() const noexcept { return capacity_; }
    std::size_t n_layers() const noexcept { return keys_.size(); }
    std::size_t n_kv_heads() const noexcept { return n_kv_heads_; }
    std::size_t d_head() const noexcept { return d_head_; }

    // Stores rows [T, n_kv_heads * d_head] at positions [length, length + T).
    // Throws InputError("cache_overflow") past capacity.
    void write(std::size_t layer, const Tensor& key_rows, const Tensor& value_rows);
    // Commits `count` positions once every layer has written them.
    void advance(std::size_t count);

    // Keys/values for positions [0, length + pending) as [rows, n_kv_heads * d_head].
    Tensor keys(std::size_t layer, std::size_t pending) const;
    Tensor values(std::size_t layer, std::size_t pending) const;

    const Tensor& key_store(std::size_t layer) const { return keys_.at(layer); }
    const Tensor& value_store(std::size_t layer) const { return values_.at(layer); }

    // Bytes held by committed positions at 4 bytes per element.
    std::size_t bytes_in_use() const;

private:
    void store(Tensor& dst, const Tensor& rows, std::size_t layer);
    Tensor gather(const Tensor& src, std::size_t rows) const;

    std::size_t capacity_;
    std::size_t n_kv_heads_;
    std::size_t d_head_;
    std::size_t length_ = 0;
    std::vector<Tensor> keys_;
    std::vector<Tensor> values_;
};

} // namespace aya::architecture
