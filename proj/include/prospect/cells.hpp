#pragma once

#include <cstddef>
#include <cstdint>
#include <span>
#include <vector>

namespace prospect {

using Level = std::uint16_t;

// Row-major mixed-radix index over a product of level sets; the last
// dimension varies fastest. An empty radix has exactly one cell.
class MixedRadix {
 public:
  MixedRadix() = default;

  explicit MixedRadix(std::vector<std::size_t> cardinalities)
      : cards_(std::move(cardinalities)), strides_(cards_.size()) {
    std::size_t stride = 1;
    for (std::size_t i = cards_.size(); i-- > 0;) {
      strides_[i] = stride;
      stride *= cards_[i];
    }
    size_ = stride;
  }

  std::size_t size() const { return size_; }
  std::size_t rank() const { return cards_.size(); }
  std::size_t cardinality(std::size_t dim) const { return cards_[dim]; }
  std::size_t stride(std::size_t dim) const { return strides_[dim]; }
  const std::vector<std::size_t>& cardinalities() const { return cards_; }

  std::size_t encode(std::span<const Level> digits) const {
    std::size_t flat = 0;
    for (std::size_t i = 0; i < cards_.size(); ++i) flat += digits[i] * strides_[i];
    return flat;
  }

  Level digit(std::size_t flat, std::size_t dim) const {
    return static_cast<Level>((flat / strides_[dim]) % cards_[dim]);
  }

  void decode(std::size_t flat, std::span<Level> out) const {
    for (std::size_t i = 0; i < cards_.size(); ++i) out[i] = digit(flat, i);
  }

  std::vector<Level> decode(std::size_t flat) const {
    std::vector<Level> out(cards_.size());
    decode(flat, out);
    return out;
  }

 private:
  std::vector<std::size_t> cards_;
  std::vector<std::size_t> strides_;
  std::size_t size_ = 1;
};

}  // namespace prospect
