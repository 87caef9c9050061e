#ifndef DISSECT_DATASTORE_HPP_
#define DISSECT_DATASTORE_HPP_

#include <cstdint>
#include <iosfwd>
#include <map>
#include <span>
#include <string>
#include <vector>

#include "dissect/catalog.hpp"
#include "dissect/masks.hpp"

namespace dissect {

using ImageId = std::uint32_t;
using UnitId = std::uint32_t;

inline constexpr std::uint16_t kFormatVersion = 1;
inline constexpr std::uint32_t kDefaultMinSamples = 5;

struct ImageAnnotation {
  Frame frame;
  std::map<ConceptId, BitMask> masks;  // absent concept => empty mask

  friend bool operator==(const ImageAnnotation&, const ImageAnnotation&) = default;
};

/// Concept annotation masks per image, keyed (and therefore ordered) by image id.
struct AnnotationStore {
  std::map<ImageId, ImageAnnotation> images;

  std::vector<ImageId> image_ids() const;
  friend bool operator==(const AnnotationStore&, const AnnotationStore&) = default;
};

/// One unit's low-resolution activation maps, laid out [image][row][col].
struct ActivationVolume {
  UnitId unit_id = 0;
  Frame grid;
  std::vector<ImageId> image_ids;
  std::vector<float> values;

  std::span<const float> image_grid(std::size_t image_index) const {
    return std::span<const float>(values).subspan(image_index * grid.pixels(), grid.pixels());
  }
  friend bool operator==(const ActivationVolume&, const ActivationVolume&) = default;
};

/// All units over a shared ascending image id list and grid size.
struct ActivationStore {
  Frame grid;
  std::vector<ImageId> image_ids;
  std::vector<ActivationVolume> units;  // unit_id == index

  const ActivationVolume& unit(UnitId id) const;
  friend bool operator==(const ActivationStore&, const ActivationStore&) = default;
};

// CEXM: annotation masks, little-endian, canonical RLE per (image, concept).
void write_masks(const AnnotationStore& store, std::ostream& out);
AnnotationStore read_masks(std::istream& in);
void save_masks(const AnnotationStore& store, const std::string& path);
AnnotationStore load_masks(const std::string& path);

// CEXA: dense f32 activations [unit][image][row][col], little-endian.
void write_activations(const ActivationStore& store, std::ostream& out);
ActivationStore read_activations(std::istream& in);
void save_activations(const ActivationStore& store, const std::string& path);
ActivationStore load_activations(const std::string& path);

/// Throws ImageSetMismatch unless both stores cover exactly the same images.
void check_image_sets(const AnnotationStore& masks, const ActivationStore& acts);

/// Fills every entry's support from the store. Throws UnknownConcept when the
/// store references an id outside the catalog.
void compute_support(ConceptCatalog& catalog, const AnnotationStore& store);

/// Recomputes support and marks concepts with support < min_samples as not
/// searchable. Ids and names are kept for reporting.
ConceptCatalog filter_concepts(ConceptCatalog catalog, const AnnotationStore& store,
                               std::uint32_t min_samples = kDefaultMinSamples);

}  // namespace dissect

#endif  // DISSECT_DATASTORE_HPP_
