#ifndef DISSECT_REPORT_HPP_
#define DISSECT_REPORT_HPP_

#include <cstdint>
#include <iosfwd>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "dissect/datastore.hpp"
#include "dissect/scoring.hpp"
#include "dissect/search.hpp"

namespace dissect {

struct LengthEntry {
  int length = 0;          // beam step
  std::string form;        // canonical text
  int form_length = 0;     // leaves in the form
  double iou = 0.0;
  std::optional<double> detacc;  // nullopt: no support

  friend bool operator==(const LengthEntry&, const LengthEntry&) = default;
};

struct UnitReport {
  UnitId unit_id = 0;
  double threshold = 0.0;
  std::vector<LengthEntry> per_length;
  std::string chosen_iou;
  std::string chosen_detacc;
  std::string selected;  // per the configured selection rule
  std::optional<int> stopped_at;
  std::vector<LengthEntry> beam;  // only with detacc_all

  friend bool operator==(const UnitReport&, const UnitReport&) = default;
};

struct DissectOptions {
  SearchConfig search;
  ThresholdOptions threshold;
  std::uint32_t min_samples = kDefaultMinSamples;
  unsigned jobs = 1;
};

/// Loaded, validated inputs shared read-only by all unit searches.
struct DissectInputs {
  ConceptCatalog catalog;  // filtered
  AnnotationStore masks;
  ActivationStore activations;
};

DissectInputs load_inputs(const std::string& masks_path, const std::string& acts_path,
                          const std::string& catalog_path, std::uint32_t min_samples);

UnitReport dissect_unit(const ActivationVolume& acts, const ConceptCatalog& catalog, const ConceptIndex& index,
                        const DissectOptions& options);

/// Reports for every unit, ordered by unit id regardless of `jobs`.
std::vector<UnitReport> dissect_all(const DissectInputs& inputs, const DissectOptions& options);

/// Canonical JSON text (sorted keys, two-space indent, trailing newline).
std::string reports_to_json(std::span<const UnitReport> reports);
/// Throws MalformedReport.
std::vector<UnitReport> reports_from_json(const std::string& text);

/// `<v>` with at least six significant digits, fixed notation.
std::string format_score(double value);

double pearson(std::span<const double> x, std::span<const double> y);
/// Pearson correlation of average ranks.
double spearman(std::span<const double> x, std::span<const double> y);
std::vector<double> average_ranks(std::span<const double> values);

/// `unit_id,length,iou,detacc,chosen` rows then `# pearson=` / `# spearman=`
/// footers over the chosen (max-IoU) form's IoU and DetAcc across units.
std::string summarize_reports(std::span<const UnitReport> reports);

}  // namespace dissect

#endif  // DISSECT_REPORT_HPP_
