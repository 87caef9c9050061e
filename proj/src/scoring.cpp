#include "dissect/scoring.hpp"

#include <algorithm>
#include <bit>
#include <cmath>
#include <functional>
#include <random>
#include <string>

#include "dissect/errors.hpp"

namespace dissect {

namespace {

void check_quantile(double quantile) {
  if (!(quantile > 0.0 && quantile < 1.0))
    throw Error(ErrorKind::InvalidArgument, "quantile must lie in (0, 1), got " + std::to_string(quantile));
}

double order_statistic(std::vector<float> values, double quantile) {
  auto n = values.size();
  auto k = static_cast<std::size_t>(std::floor(static_cast<long double>(quantile) * n));
  if (k >= n) k = n - 1;
  std::nth_element(values.begin(), values.begin() + static_cast<std::ptrdiff_t>(k), values.end(),
                   std::greater<float>());
  return values[k];
}

void check_upsample(Frame source, Frame target, std::size_t grid_size) {
  if (source.height < 1 || source.width < 1 || target.height < source.height || target.width < source.width)
    throw Error(ErrorKind::InvalidDimensions, "cannot upsample " + std::to_string(source.height) + "x" +
                                                  std::to_string(source.width) + " to " +
                                                  std::to_string(target.height) + "x" + std::to_string(target.width));
  if (grid_size != source.pixels())
    throw Error(ErrorKind::DimensionMismatch, "grid has " + std::to_string(grid_size) + " values, expected " +
                                                  std::to_string(source.pixels()));
}

struct AxisSample {
  std::size_t lo;
  std::size_t hi;
  double frac;
};

std::vector<AxisSample> corner_aligned_axis(std::size_t source, std::size_t target) {
  std::vector<AxisSample> axis(target);
  for (std::size_t i = 0; i < target; ++i) {
    double s = target > 1 ? static_cast<double>(i * (source - 1)) / static_cast<double>(target - 1) : 0.0;
    auto lo = static_cast<std::size_t>(std::floor(s));
    if (lo > source - 1) lo = source - 1;
    axis[i] = AxisSample{lo, std::min(lo + 1, source - 1), s - static_cast<double>(lo)};
  }
  return axis;
}

}  // namespace

double compute_threshold(std::span<const float> values, double quantile) {
  check_quantile(quantile);
  if (values.empty()) throw Error(ErrorKind::EmptyActivations, "no activation values to threshold");
  return order_statistic(std::vector<float>(values.begin(), values.end()), quantile);
}

double compute_threshold_sampled(std::span<const float> values, double quantile, std::size_t sample_size,
                                 std::uint64_t seed) {
  check_quantile(quantile);
  if (values.empty()) throw Error(ErrorKind::EmptyActivations, "no activation values to threshold");
  if (sample_size < kMinReservoirSize)
    throw Error(ErrorKind::InvalidArgument,
                "reservoir sample size must be at least " + std::to_string(kMinReservoirSize));
  if (values.size() <= sample_size) return compute_threshold(values, quantile);

  std::mt19937_64 rng(seed);
  std::vector<float> reservoir(values.begin(), values.begin() + static_cast<std::ptrdiff_t>(sample_size));
  for (std::size_t i = sample_size; i < values.size(); ++i) {
    std::uniform_int_distribution<std::size_t> pick(0, i);
    auto j = pick(rng);
    if (j < sample_size) reservoir[j] = values[i];
  }
  return order_statistic(std::move(reservoir), quantile);
}

std::vector<double> upsample_bilinear(std::span<const float> grid, Frame source, Frame target) {
  check_upsample(source, target, grid.size());
  auto rows = corner_aligned_axis(source.height, target.height);
  auto cols = corner_aligned_axis(source.width, target.width);
  std::vector<double> out(target.pixels());
  const std::size_t sw = source.width;
  for (std::size_t r = 0; r < target.height; ++r) {
    const auto& ry = rows[r];
    for (std::size_t c = 0; c < target.width; ++c) {
      const auto& cx = cols[c];
      double top = grid[ry.lo * sw + cx.lo] * (1.0 - cx.frac) + grid[ry.lo * sw + cx.hi] * cx.frac;
      double bottom = grid[ry.hi * sw + cx.lo] * (1.0 - cx.frac) + grid[ry.hi * sw + cx.hi] * cx.frac;
      out[r * target.width + c] = top * (1.0 - ry.frac) + bottom * ry.frac;
    }
  }
  return out;
}

std::vector<double> upsample_nearest(std::span<const float> grid, Frame source, Frame target) {
  check_upsample(source, target, grid.size());
  std::vector<double> out(target.pixels());
  for (std::size_t r = 0; r < target.height; ++r) {
    std::size_t sr = r * source.height / target.height;
    for (std::size_t c = 0; c < target.width; ++c) {
      std::size_t sc = c * source.width / target.width;
      out[r * target.width + c] = grid[sr * source.width + sc];
    }
  }
  return out;
}

std::vector<double> upsample(std::span<const float> grid, Frame source, Frame target, UpsampleMode mode) {
  return mode == UpsampleMode::Nearest ? upsample_nearest(grid, source, target)
                                       : upsample_bilinear(grid, source, target);
}

BitMask binarize(std::span<const double> values, Frame frame, double threshold) {
  if (values.size() != frame.pixels())
    throw Error(ErrorKind::DimensionMismatch, "value grid does not match the mask frame");
  BitMask m(frame);
  auto words = m.words();
  for (std::size_t i = 0; i < values.size(); ++i)
    if (values[i] >= threshold) words[i / kWordBits] |= Word{1} << (i % kWordBits);
  return m;
}

ConceptIndex::ConceptIndex(const AnnotationStore& store, std::size_t concept_count) {
  std::vector<ImageId> ids;
  std::vector<Frame> frames;
  for (const auto& [id, image] : store.images) {
    ids.push_back(id);
    frames.push_back(image.frame);
  }
  layout_ = std::make_shared<const VolumeLayout>(std::move(ids), std::move(frames));
  concepts_.assign(concept_count, MaskVolume(layout_));
  std::size_t image = 0;
  for (const auto& [id, ann] : store.images) {
    for (const auto& [concept_id, mask] : ann.masks) {
      if (concept_id >= concept_count)
        throw Error(ErrorKind::UnknownConcept, "image " + std::to_string(id) + " annotates unknown concept id " +
                                                   std::to_string(concept_id));
      concepts_[concept_id].set_image(image, mask);
    }
    ++image;
  }
}

const MaskVolume& ConceptIndex::concept_mask(ConceptId id) const {
  if (id >= concepts_.size()) throw Error(ErrorKind::UnknownConcept, "unknown concept id " + std::to_string(id));
  return concepts_[id];
}

UnitMaskVolume build_unit_masks(const ActivationVolume& acts, const std::shared_ptr<const VolumeLayout>& layout,
                                const ThresholdOptions& options) {
  auto ids = layout->image_ids();
  if (!std::equal(ids.begin(), ids.end(), acts.image_ids.begin(), acts.image_ids.end()))
    throw Error(ErrorKind::ImageSetMismatch,
                "unit " + std::to_string(acts.unit_id) + " does not cover the annotated image set");
  if (acts.values.size() != acts.image_ids.size() * acts.grid.pixels())
    throw Error(ErrorKind::DimensionMismatch, "unit " + std::to_string(acts.unit_id) + " has a malformed volume");

  UnitMaskVolume unit;
  unit.unit_id = acts.unit_id;
  unit.threshold = options.sample_size == 0
                       ? compute_threshold(acts.values, options.quantile)
                       : compute_threshold_sampled(acts.values, options.quantile, options.sample_size,
                                                   options.sample_seed);
  unit.masks = MaskVolume(layout);
  for (std::size_t i = 0; i < layout->image_count(); ++i) {
    auto frame = layout->frame(i);
    auto values = upsample(acts.image_grid(i), acts.grid, frame, options.upsample);
    unit.masks.set_image(i, binarize(values, frame, unit.threshold));
  }
  return unit;
}

namespace {

void eval_into(const LogicalForm& form, const ConceptIndex& index, std::span<Word> out) {
  switch (form.kind()) {
    case LogicalForm::Kind::Leaf: {
      auto src = index.concept_mask(form.concept_id()).words();
      std::copy(src.begin(), src.end(), out.begin());
      return;
    }
    case LogicalForm::Kind::Not: {
      eval_into(form.child(), index, out);
      auto valid = index.layout()->valid();
      for (std::size_t i = 0; i < out.size(); ++i) out[i] = ~out[i] & valid[i];
      return;
    }
    case LogicalForm::Kind::And:
    case LogicalForm::Kind::Or: {
      eval_into(form.left(), index, out);
      std::vector<Word> rhs(out.size());
      eval_into(form.right(), index, rhs);
      if (form.kind() == LogicalForm::Kind::And)
        for (std::size_t i = 0; i < out.size(); ++i) out[i] &= rhs[i];
      else
        for (std::size_t i = 0; i < out.size(); ++i) out[i] |= rhs[i];
      return;
    }
  }
}

void check_same_layout(const MaskVolume& a, const MaskVolume& b) {
  if (a.words().size() != b.words().size())
    throw Error(ErrorKind::DimensionMismatch, "unit and explanation masks cover different image layouts");
}

}  // namespace

MaskVolume eval_form_volume(const LogicalForm& form, const ConceptIndex& index) {
  MaskVolume out(index.layout());
  eval_into(form, index, out.words());
  return out;
}

double iou_score(const MaskVolume& unit, const MaskVolume& explanation) {
  check_same_layout(unit, explanation);
  auto m = unit.words();
  auto g = explanation.words();
  std::size_t inter = 0;
  std::size_t uni = 0;
  for (std::size_t i = 0; i < m.size(); ++i) {
    inter += static_cast<std::size_t>(std::popcount(m[i] & g[i]));
    uni += static_cast<std::size_t>(std::popcount(m[i] | g[i]));
  }
  return uni == 0 ? 0.0 : static_cast<double>(inter) / static_cast<double>(uni);
}

double iou_score(const UnitMaskVolume& unit, const LogicalForm& form, const ConceptIndex& index) {
  return iou_score(unit.masks, eval_form_volume(form, index));
}

std::optional<double> detacc_score(const MaskVolume& unit, const MaskVolume& explanation) {
  check_same_layout(unit, explanation);
  const auto& layout = explanation.layout();
  std::size_t present = 0;
  std::size_t detected = 0;
  for (std::size_t img = 0; img < layout.image_count(); ++img) {
    auto g = explanation.image_words(img);
    if (std::all_of(g.begin(), g.end(), [](Word w) { return w == 0; })) continue;
    ++present;
    auto m = unit.image_words(img);
    for (std::size_t i = 0; i < g.size(); ++i) {
      if ((m[i] & g[i]) != 0) {
        ++detected;
        break;
      }
    }
  }
  if (present == 0) return std::nullopt;
  return static_cast<double>(detected) / static_cast<double>(present);
}

std::optional<double> detacc_score(const UnitMaskVolume& unit, const LogicalForm& form, const ConceptIndex& index) {
  return detacc_score(unit.masks, eval_form_volume(form, index));
}

}  // namespace dissect
