#ifndef DISSECT_SCORING_HPP_
#define DISSECT_SCORING_HPP_

#include <cstdint>
#include <memory>
#include <optional>
#include <span>
#include <vector>

#include "dissect/datastore.hpp"
#include "dissect/forms.hpp"
#include "dissect/masks.hpp"

namespace dissect {

/// Fraction of activations that must lie strictly above the unit threshold.
inline constexpr double kDefaultQuantile = 0.005;
inline constexpr std::size_t kMinReservoirSize = 1'000'000;

/// Exact top-quantile threshold: with k = floor(quantile * N), returns the
/// (k+1)-th largest value, so at most k values are strictly greater.
double compute_threshold(std::span<const float> values, double quantile = kDefaultQuantile);

/// Approximate threshold from a uniform reservoir sample of `sample_size`
/// values (at least kMinReservoirSize). Exact when the input fits the sample.
double compute_threshold_sampled(std::span<const float> values, double quantile, std::size_t sample_size,
                                 std::uint64_t seed);

enum class UpsampleMode { BilinearCorners, Nearest };

/// Corner-aligned bilinear interpolation of a row-major grid to `target`.
std::vector<double> upsample_bilinear(std::span<const float> grid, Frame source, Frame target);
/// Block replication: target index i samples source index floor(i * S / D).
std::vector<double> upsample_nearest(std::span<const float> grid, Frame source, Frame target);
std::vector<double> upsample(std::span<const float> grid, Frame source, Frame target, UpsampleMode mode);

/// Pixel set iff value >= threshold.
BitMask binarize(std::span<const double> values, Frame frame, double threshold);

/// Atomic concept masks of an AnnotationStore packed per concept across the
/// whole dataset, in ascending image id order.
class ConceptIndex {
 public:
  ConceptIndex(const AnnotationStore& store, std::size_t concept_count);

  const std::shared_ptr<const VolumeLayout>& layout() const { return layout_; }
  std::size_t concept_count() const { return concepts_.size(); }
  const MaskVolume& concept_mask(ConceptId id) const;

 private:
  std::shared_ptr<const VolumeLayout> layout_;
  std::vector<MaskVolume> concepts_;
};

/// M_u over all images at annotation resolution.
struct UnitMaskVolume {
  UnitId unit_id = 0;
  double threshold = 0.0;
  MaskVolume masks;
};

struct ThresholdOptions {
  double quantile = kDefaultQuantile;
  UpsampleMode upsample = UpsampleMode::BilinearCorners;
  /// 0 selects the exact threshold; otherwise the reservoir sample size.
  std::size_t sample_size = 0;
  std::uint64_t sample_seed = 0;
};

/// Thresholds the unit over its low-resolution activations, then upsamples
/// each image's grid to that image's annotation frame and binarizes.
UnitMaskVolume build_unit_masks(const ActivationVolume& acts, const std::shared_ptr<const VolumeLayout>& layout,
                                const ThresholdOptions& options = {});

/// G_E over the whole dataset.
MaskVolume eval_form_volume(const LogicalForm& form, const ConceptIndex& index);

/// Dataset-wide intersection over union; 0 when both masks are empty.
double iou_score(const MaskVolume& unit, const MaskVolume& explanation);
double iou_score(const UnitMaskVolume& unit, const LogicalForm& form, const ConceptIndex& index);

/// Share of images containing the explanation on which the unit mask overlaps
/// it. nullopt (no support) when the explanation occurs on no image.
std::optional<double> detacc_score(const MaskVolume& unit, const MaskVolume& explanation);
std::optional<double> detacc_score(const UnitMaskVolume& unit, const LogicalForm& form, const ConceptIndex& index);

/// Ranking value of a DetAcc result: no support counts as 0.
inline double detacc_or_zero(const std::optional<double>& d) { return d.value_or(0.0); }

}  // namespace dissect

#endif  // DISSECT_SCORING_HPP_
