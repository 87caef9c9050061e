#include "dissect/masks.hpp"

#include <algorithm>
#include <bit>
#include <string>

#include "dissect/errors.hpp"

namespace dissect {

namespace {

void clear_padding(std::span<Word> words, std::size_t bits) {
  std::size_t tail = bits % kWordBits;
  if (tail != 0 && !words.empty()) words.back() &= (Word{1} << tail) - 1;
}

std::string frame_text(Frame f) {
  return std::to_string(f.height) + "x" + std::to_string(f.width);
}

}  // namespace

BitMask::BitMask(Frame frame) : frame_(frame), words_(words_for(frame.pixels()), 0) {}

BitMask BitMask::ones(Frame frame) {
  BitMask m(frame);
  std::fill(m.words_.begin(), m.words_.end(), ~Word{0});
  clear_padding(m.words_, m.size());
  return m;
}

BitMask BitMask::from_pixels(Frame frame, std::span<const std::uint8_t> pixels) {
  if (pixels.size() != frame.pixels())
    throw Error(ErrorKind::DimensionMismatch,
                "pixel buffer of " + std::to_string(pixels.size()) +
                    " values does not fill a " + frame_text(frame) + " mask");
  BitMask m(frame);
  for (std::size_t i = 0; i < pixels.size(); ++i)
    if (pixels[i]) m.words_[i / kWordBits] |= Word{1} << (i % kWordBits);
  return m;
}

BitMask BitMask::from_rows(std::initializer_list<std::initializer_list<int>> rows) {
  std::size_t h = rows.size();
  std::size_t w = h ? rows.begin()->size() : 0;
  std::vector<std::uint8_t> px;
  px.reserve(h * w);
  for (const auto& r : rows) {
    if (r.size() != w) throw Error(ErrorKind::DimensionMismatch, "ragged mask rows");
    for (int v : r) px.push_back(v ? 1 : 0);
  }
  return from_pixels(Frame{static_cast<std::uint16_t>(h), static_cast<std::uint16_t>(w)}, px);
}

void BitMask::assign(std::size_t index, bool value) {
  Word bit = Word{1} << (index % kWordBits);
  if (value)
    words_[index / kWordBits] |= bit;
  else
    words_[index / kWordBits] &= ~bit;
}

std::size_t BitMask::popcount() const { return popcount_words(words_); }

bool BitMask::any() const {
  return std::any_of(words_.begin(), words_.end(), [](Word w) { return w != 0; });
}

BitMask mask_apply(MaskOp op, const BitMask& a, const BitMask* b) {
  if (op == MaskOp::Not) {
    if (b != nullptr) throw Error(ErrorKind::InvalidArgument, "NOT takes a single operand");
    BitMask out = a;
    auto words = out.words();
    for (auto& w : words) w = ~w;
    clear_padding(words, out.size());
    return out;
  }
  if (b == nullptr) throw Error(ErrorKind::InvalidArgument, "AND/OR require two operands");
  if (a.frame() != b->frame())
    throw Error(ErrorKind::DimensionMismatch,
                "mask shapes differ: " + frame_text(a.frame()) + " vs " + frame_text(b->frame()));
  BitMask out = a;
  auto dst = out.words();
  auto src = b->words();
  if (op == MaskOp::And)
    for (std::size_t i = 0; i < dst.size(); ++i) dst[i] &= src[i];
  else
    for (std::size_t i = 0; i < dst.size(); ++i) dst[i] |= src[i];
  return out;
}

RleRuns rle_encode(const BitMask& mask) {
  RleRuns runs;
  bool current = false;
  std::uint32_t length = 0;
  for (std::size_t i = 0; i < mask.size(); ++i) {
    bool bit = mask.test(i);
    if (bit != current) {
      runs.push_back(length);
      current = bit;
      length = 0;
    }
    ++length;
  }
  if (length > 0 || runs.empty()) runs.push_back(length);
  return runs;
}

BitMask rle_decode(std::span<const std::uint32_t> runs, Frame frame) {
  std::uint64_t total = 0;
  for (auto r : runs) total += r;
  if (total != frame.pixels())
    throw Error(ErrorKind::LengthMismatch,
                "run lengths sum to " + std::to_string(total) + " but a " + frame_text(frame) +
                    " mask has " + std::to_string(frame.pixels()) + " pixels");
  BitMask m(frame);
  std::size_t pos = 0;
  bool value = false;
  for (auto r : runs) {
    if (value)
      for (std::size_t i = pos; i < pos + r; ++i) m.assign(i, true);
    pos += r;
    value = !value;
  }
  return m;
}

VolumeLayout::VolumeLayout(std::vector<std::uint32_t> image_ids, std::vector<Frame> frames)
    : image_ids_(std::move(image_ids)), frames_(std::move(frames)) {
  if (image_ids_.size() != frames_.size())
    throw Error(ErrorKind::DimensionMismatch, "image id and frame lists differ in length");
  offsets_.reserve(frames_.size() + 1);
  offsets_.push_back(0);
  for (const auto& f : frames_) offsets_.push_back(offsets_.back() + words_for(f.pixels()));
  valid_.assign(offsets_.back(), 0);
  for (std::size_t i = 0; i < frames_.size(); ++i) {
    auto span = std::span<Word>(valid_).subspan(offsets_[i], offsets_[i + 1] - offsets_[i]);
    std::fill(span.begin(), span.end(), ~Word{0});
    clear_padding(span, frames_[i].pixels());
  }
}

MaskVolume::MaskVolume(std::shared_ptr<const VolumeLayout> layout)
    : layout_(std::move(layout)), words_(layout_->word_count(), 0) {}

void MaskVolume::set_image(std::size_t image, const BitMask& mask) {
  if (mask.frame() != layout_->frame(image))
    throw Error(ErrorKind::DimensionMismatch,
                "mask " + frame_text(mask.frame()) + " does not match image frame " +
                    frame_text(layout_->frame(image)));
  auto src = mask.words();
  std::copy(src.begin(), src.end(), words_.begin() + static_cast<std::ptrdiff_t>(layout_->offset(image)));
}

BitMask MaskVolume::image_mask(std::size_t image) const {
  BitMask m(layout_->frame(image));
  auto src = image_words(image);
  std::copy(src.begin(), src.end(), m.words().begin());
  return m;
}

std::size_t MaskVolume::popcount() const { return popcount_words(words_); }

std::size_t popcount_words(std::span<const Word> words) {
  std::size_t n = 0;
  for (Word w : words) n += static_cast<std::size_t>(std::popcount(w));
  return n;
}

std::size_t popcount_and(std::span<const Word> a, std::span<const Word> b) {
  std::size_t n = 0;
  for (std::size_t i = 0; i < a.size(); ++i) n += static_cast<std::size_t>(std::popcount(a[i] & b[i]));
  return n;
}

}  // namespace dissect
