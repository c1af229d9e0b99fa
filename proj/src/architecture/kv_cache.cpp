#include "aya/architecture/kv_cache.hpp"

#include <algorithm>

namespace aya::architecture {

KvCache::KvCache(const ModelConfig& config, std::size_t capacity, DType dtype)
    : capacity_(capacity), n_kv_heads_(config.n_kv_heads), d_head_(config.d_head)
{
    config.validate();
    for (std::uint64_t l = 0; l < config.n_layers; ++l) {
        keys_.emplace_back(numerics::Shape{n_kv_heads_, capacity_, d_head_}, dtype);
        values_.emplace_back(numerics::Shape{n_kv_heads_, capacity_, d_head_}, dtype);
    }
}

void KvCache::store(Tensor& dst, const Tensor& rows, std::size_t layer)
{
    numerics::require_rank(rows, 2, "KvCache::write");
    if (rows.cols() != n_kv_heads_ * d_head_) {
        throw numerics::ShapeError("KvCache::write: rows of width " + std::to_string(rows.cols()) + ", expected "
                                   + std::to_string(n_kv_heads_ * d_head_));
    }
    if (length_ + rows.rows() > capacity_) {
        throw InputError("cache_overflow", "KV cache capacity " + std::to_string(capacity_) + " exceeded at layer "
                                               + std::to_string(layer));
    }
    for (std::size_t t = 0; t < rows.rows(); ++t) {
        for (std::size_t h = 0; h < n_kv_heads_; ++h) {
            const double* src = rows.row(t).data() + h * d_head_;
            double* out = dst.data().data() + (h * capacity_ + length_ + t) * d_head_;
            std::copy_n(src, d_head_, out);
        }
    }
}

void KvCache::write(std::size_t layer, const Tensor& key_rows, const Tensor& value_rows)
{
    if (layer >= keys_.size()) {
        throw numerics::ShapeError("KvCache::write: layer " + std::to_string(layer) + " out of range");
    }
    store(keys_[layer], key_rows, layer);
    store(values_[layer], value_rows, layer);
}

void KvCache::advance(std::size_t count)
{
    if (length_ + count > capacity_) {
        throw InputError("cache_overflow", "KV cache capacity " + std::to_string(capacity_) + " exceeded");
    }
    length_ += count;
}

Tensor KvCache::gather(const Tensor& src, std::size_t rows) const
{
    Tensor out({rows, n_kv_heads_ * d_head_}, src.dtype());
    for (std::size_t t = 0; t < rows; ++t) {
        for (std::size_t h = 0; h < n_kv_heads_; ++h) {
            const double* from = src.data().data() + (h * capacity_ + t) * d_head_;
            std::copy_n(from, d_head_, out.row(t).data() + h * d_head_);
        }
    }
    return out;
}

Tensor KvCache::keys(std::size_t layer, std::size_t pending) const
{
    return gather(keys_.at(layer), length_ + pending);
}

Tensor KvCache::values(std::size_t layer, std::size_t pending) const
{
    return gather(values_.at(layer), length_ + pending);
}

std::size_t KvCache::bytes_in_use() const
{
    return 2 * keys_.size() * n_kv_heads_ * d_head_ * length_ * sizeof(float);
}

} // namespace aya::architecture
