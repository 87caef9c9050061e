#ifndef DISSECT_SYNTH_HPP_
#define DISSECT_SYNTH_HPP_

#include <cstdint>
#include <optional>
#include <span>
#include <string>
#include <utility>
#include <vector>

#include "dissect/catalog.hpp"
#include "dissect/datastore.hpp"
#include "dissect/forms.hpp"
#include "dissect/search.hpp"

namespace dissect {

/// Parameters of a synthetic probing set with a known explanation.
struct SynthSpec {
  std::uint64_t seed = 0;
  std::uint32_t image_count = 32;
  Frame annotation{32, 32};
  Frame activation{8, 8};
  std::uint32_t concept_count = 8;
  double concept_density = 0.5;  // probability a concept appears on an image
  std::optional<LogicalForm> ground_truth;
  double noise_sigma = 0.0;
  double activation_gain = 1.0;

  /// Throws InvalidSpec.
  void validate() const;
};

/// Catalog `c0..c{n-1}` and rectangular-blob annotations, deterministic in the seed.
std::pair<ConceptCatalog, AnnotationStore> gen_dataset(const SynthSpec& spec);

/// Activation volume whose clean signal is the ground-truth form's mask,
/// block-mean downsampled, scaled by the gain, plus seeded Gaussian noise.
ActivationVolume gen_unit(const SynthSpec& spec, const AnnotationStore& store, UnitId unit_id = 0);

/// Random form of exactly `length` distinct concepts built the way the beam
/// builds forms (`F op c` chains over `operators`).
LogicalForm random_chain_form(std::uint64_t seed, std::uint32_t concept_count, int length,
                              std::span<const Operator> operators);

/// Block-mean downsampling of a mask to `target` (cell r covers source rows
/// [r*H/h, (r+1)*H/h)).
std::vector<float> block_mean(const BitMask& mask, Frame target);

/// A complete on-disk-ready fixture: one dataset and `unit_count` units, unit
/// u explained by `ground_truth[u]`.
struct SynthFixture {
  ConceptCatalog catalog;
  AnnotationStore masks;
  ActivationStore activations;
  std::vector<LogicalForm> ground_truth;
};

/// Units get seed `spec.seed + u + 1` for their form and noise. When
/// `spec.ground_truth` is set every unit uses it; otherwise each draws a
/// random chain form of `form_length` concepts.
SynthFixture gen_fixture(const SynthSpec& spec, std::uint32_t unit_count, int form_length,
                         std::span<const Operator> operators);

/// Writes masks.cexm, acts.cexa, catalog.csv and ground_truth.csv into `dir`.
void save_fixture(const SynthFixture& fixture, const std::string& dir);

}  // namespace dissect

#endif  // DISSECT_SYNTH_HPP_
