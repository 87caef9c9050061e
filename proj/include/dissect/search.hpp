#ifndef DISSECT_SEARCH_HPP_
#define DISSECT_SEARCH_HPP_

#include <map>
#include <optional>
#include <span>
#include <vector>

#include "dissect/forms.hpp"
#include "dissect/scoring.hpp"

namespace dissect {

/// Ways a beam member F is combined with an atomic concept c.
enum class Operator { And, Or, AndNot, OrNot };

const char* to_string(Operator op);

enum class SelectionRule { MaxIou, MaxDetAcc };

struct StoppingRule {
  enum class Kind { None, DetAccDrop };
  Kind kind = Kind::None;
  double epsilon = 0.0;
  int patience = 1;
};

struct SearchConfig {
  int beam_size = 10;
  int max_length = 3;
  std::vector<Operator> operators{Operator::And, Operator::Or, Operator::AndNot};
  SelectionRule selection = SelectionRule::MaxIou;
  StoppingRule stopping;
  /// Score DetAcc for every beam member, not only the per-length bests.
  bool detacc_all = false;

  /// Throws InvalidArgument on B < 1, n < 1, epsilon < 0, patience < 1 or an
  /// empty operator set.
  void validate() const;
};

struct ScoredExplanation {
  LogicalForm form;
  int length = 0;
  double iou = 0.0;
  std::optional<double> detacc;  // nullopt: not computed, or no support
};

struct BeamState {
  /// At most B entries, IoU descending.
  std::vector<ScoredExplanation> beam;
  /// Best form held by the beam after step k, for k = 1..(last step run).
  std::map<int, ScoredExplanation> per_length_best;
  /// Step at which the stopping rule fired, if it did.
  std::optional<int> stopped_at;
};

/// One unit's search inputs: its mask, the dataset's concept masks and the
/// concepts allowed as leaves.
class SearchContext {
 public:
  SearchContext(const ConceptIndex& index, const UnitMaskVolume& unit, std::vector<ConceptId> concepts);

  const ConceptIndex& index() const { return *index_; }
  const UnitMaskVolume& unit() const { return *unit_; }
  std::span<const ConceptId> concepts() const { return concepts_; }

  /// Full scoring through the general evaluation route.
  ScoredExplanation score(const LogicalForm& form, bool with_detacc = true) const;
  std::optional<double> detacc(const LogicalForm& form) const;

 private:
  const ConceptIndex* index_;
  const UnitMaskVolume* unit_;
  std::vector<ConceptId> concepts_;
};

/// Highest-IoU single concept; ties go to the lowest concept id.
ScoredExplanation atomic_search(const SearchContext& ctx);

/// Beam search over forms built by combining beam members with atomic
/// concepts, merging with the previous beam and keeping the top B by IoU.
BeamState beam_search(const SearchContext& ctx, const SearchConfig& config);

inline constexpr std::size_t kExhaustiveMaxConcepts = 10;
inline constexpr int kExhaustiveMaxLength = 3;

/// True max-IoU form over every form the operator grammar generates up to
/// `max_length`. Throws InstanceTooLarge beyond 10 concepts or length 3.
ScoredExplanation exhaustive_search(const SearchContext& ctx, int max_length,
                                    std::span<const Operator> operators);

/// Number of forms of length <= max_length the operator grammar generates
/// (counting structurally distinct ones once per generation path).
std::size_t candidate_space_size(std::size_t concept_count, std::size_t operator_count, int max_length);

/// MaxIou: the last per-length best. MaxDetAcc: the per-length best with the
/// highest DetAcc (no support counts as 0), ties to the shortest form and
/// then the earliest step. Missing DetAcc values are computed through `ctx`.
ScoredExplanation select_explanation(const BeamState& state, const SearchContext& ctx, SelectionRule rule);

enum class StopDecision { Continue, Stop };

/// Stop once DetAcc has been more than `epsilon` below its running maximum
/// for the last `patience` consecutive lengths.
StopDecision stopping_check(std::span<const double> history, double epsilon, int patience);

}  // namespace dissect

#endif  // DISSECT_SEARCH_HPP_
