#ifndef DISSECT_MASKS_HPP_
#define DISSECT_MASKS_HPP_

#include <cstddef>
#include <cstdint>
#include <initializer_list>
#include <memory>
#include <span>
#include <vector>

namespace dissect {

struct Frame {
  std::uint16_t height = 0;
  std::uint16_t width = 0;

  std::size_t pixels() const { return std::size_t{height} * width; }
  friend bool operator==(const Frame&, const Frame&) = default;
};

using Word = std::uint64_t;
inline constexpr std::size_t kWordBits = 64;

inline std::size_t words_for(std::size_t bits) {
  return (bits + kWordBits - 1) / kWordBits;
}

/// Binary pixel mask at annotation resolution.
///
/// Pixels are packed row-major into 64-bit words, pixel p = row * width + col
/// living at bit (p % 64) of word (p / 64). Bits past height*width in the
/// final word are always zero.
class BitMask {
 public:
  BitMask() = default;
  explicit BitMask(Frame frame);  // all zeros

  static BitMask zeros(Frame frame) { return BitMask(frame); }
  static BitMask ones(Frame frame);
  /// Builds a mask from row-major 0/1 values; size must equal frame.pixels().
  static BitMask from_pixels(Frame frame, std::span<const std::uint8_t> pixels);
  static BitMask from_rows(std::initializer_list<std::initializer_list<int>> rows);

  Frame frame() const { return frame_; }
  std::uint16_t height() const { return frame_.height; }
  std::uint16_t width() const { return frame_.width; }
  std::size_t size() const { return frame_.pixels(); }

  bool get(std::size_t row, std::size_t col) const { return test(row * frame_.width + col); }
  void set(std::size_t row, std::size_t col, bool value = true) {
    assign(row * frame_.width + col, value);
  }
  bool test(std::size_t index) const {
    return (words_[index / kWordBits] >> (index % kWordBits)) & 1u;
  }
  void assign(std::size_t index, bool value);

  std::size_t popcount() const;
  bool any() const;

  std::span<const Word> words() const { return words_; }
  std::span<Word> words() { return words_; }

  friend bool operator==(const BitMask&, const BitMask&) = default;

 private:
  Frame frame_;
  std::vector<Word> words_;
};

enum class MaskOp { And, Or, Not };

/// Pixel-wise boolean operation. `b` must be null for Not and non-null for
/// And/Or. Not complements within the image frame.
BitMask mask_apply(MaskOp op, const BitMask& a, const BitMask* b = nullptr);

inline BitMask mask_and(const BitMask& a, const BitMask& b) { return mask_apply(MaskOp::And, a, &b); }
inline BitMask mask_or(const BitMask& a, const BitMask& b) { return mask_apply(MaskOp::Or, a, &b); }
inline BitMask mask_not(const BitMask& a) { return mask_apply(MaskOp::Not, a); }

inline std::size_t popcount(const BitMask& a) { return a.popcount(); }

/// Canonical run lengths: alternating zero/one runs starting with a
/// (possibly empty) zero run; every later run is non-empty.
using RleRuns = std::vector<std::uint32_t>;

RleRuns rle_encode(const BitMask& mask);
BitMask rle_decode(std::span<const std::uint32_t> runs, Frame frame);

/// Per-image word ranges for a dataset-wide packed mask.
///
/// A MaskVolume is the concatenation of one BitMask word array per image, so
/// set algebra over the whole dataset is a single pass over contiguous words.
class VolumeLayout {
 public:
  VolumeLayout(std::vector<std::uint32_t> image_ids, std::vector<Frame> frames);

  std::size_t image_count() const { return image_ids_.size(); }
  std::size_t word_count() const { return offsets_.back(); }
  std::span<const std::uint32_t> image_ids() const { return image_ids_; }
  Frame frame(std::size_t image) const { return frames_[image]; }
  std::size_t offset(std::size_t image) const { return offsets_[image]; }
  std::size_t words_in(std::size_t image) const {
    return offsets_[image + 1] - offsets_[image];
  }
  /// Words with every in-frame pixel bit set; padding bits clear.
  std::span<const Word> valid() const { return valid_; }

 private:
  std::vector<std::uint32_t> image_ids_;
  std::vector<Frame> frames_;
  std::vector<std::size_t> offsets_;
  std::vector<Word> valid_;
};

class MaskVolume {
 public:
  MaskVolume() = default;
  explicit MaskVolume(std::shared_ptr<const VolumeLayout> layout);  // all zeros

  const VolumeLayout& layout() const { return *layout_; }
  const std::shared_ptr<const VolumeLayout>& layout_ptr() const { return layout_; }

  std::span<const Word> words() const { return words_; }
  std::span<Word> words() { return words_; }
  std::span<const Word> image_words(std::size_t image) const {
    return std::span<const Word>(words_).subspan(layout_->offset(image), layout_->words_in(image));
  }

  void set_image(std::size_t image, const BitMask& mask);
  BitMask image_mask(std::size_t image) const;

  std::size_t popcount() const;

  friend bool operator==(const MaskVolume& a, const MaskVolume& b) { return a.words_ == b.words_; }

 private:
  std::shared_ptr<const VolumeLayout> layout_;
  std::vector<Word> words_;
};

std::size_t popcount_words(std::span<const Word> words);
std::size_t popcount_and(std::span<const Word> a, std::span<const Word> b);

}  // namespace dissect

#endif  // DISSECT_MASKS_HPP_
