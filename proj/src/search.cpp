#include "dissect/search.hpp"

#include <algorithm>
#include <bit>
#include <string>
#include <unordered_set>

#include "dissect/errors.hpp"

namespace dissect {

const char* to_string(Operator op) {
  switch (op) {
    case Operator::And: return "and";
    case Operator::Or: return "or";
    case Operator::AndNot: return "and-not";
    case Operator::OrNot: return "or-not";
  }
  return "and";
}

void SearchConfig::validate() const {
  if (beam_size < 1) throw Error(ErrorKind::InvalidArgument, "beam size must be >= 1");
  if (max_length < 1) throw Error(ErrorKind::InvalidArgument, "max length must be >= 1");
  if (operators.empty()) throw Error(ErrorKind::InvalidArgument, "operator set is empty");
  if (!(stopping.epsilon >= 0.0)) throw Error(ErrorKind::InvalidArgument, "epsilon must be >= 0");
  if (stopping.patience < 1) throw Error(ErrorKind::InvalidArgument, "patience must be >= 1");
}

SearchContext::SearchContext(const ConceptIndex& index, const UnitMaskVolume& unit, std::vector<ConceptId> concepts)
    : index_(&index), unit_(&unit), concepts_(std::move(concepts)) {
  std::sort(concepts_.begin(), concepts_.end());
  concepts_.erase(std::unique(concepts_.begin(), concepts_.end()), concepts_.end());
  if (unit.masks.words().size() != index.layout()->word_count())
    throw Error(ErrorKind::DimensionMismatch, "unit mask does not match the annotation layout");
  for (auto id : concepts_) index.concept_mask(id);  // validates ids
}

ScoredExplanation SearchContext::score(const LogicalForm& form, bool with_detacc) const {
  auto g = eval_form_volume(form, *index_);
  ScoredExplanation out{form, form.length(), iou_score(unit_->masks, g), std::nullopt};
  if (with_detacc) out.detacc = detacc_score(unit_->masks, g);
  return out;
}

std::optional<double> SearchContext::detacc(const LogicalForm& form) const {
  return detacc_score(unit_->masks, eval_form_volume(form, *index_));
}

namespace {

LogicalForm combine(const LogicalForm& f, ConceptId c, Operator op) {
  auto leaf = LogicalForm::leaf(c);
  switch (op) {
    case Operator::And: return LogicalForm::conjunction(f, leaf);
    case Operator::Or: return LogicalForm::disjunction(f, leaf);
    case Operator::AndNot: return LogicalForm::conjunction(f, LogicalForm::negation(leaf));
    case Operator::OrNot: return LogicalForm::disjunction(f, LogicalForm::negation(leaf));
  }
  return f;
}

// Structural identity key of `parent op c`; atoms are keyed by their id.
std::string combined_key(const std::string& parent, ConceptId c, Operator op) {
  std::string key = "(" + parent;
  key += (op == Operator::And || op == Operator::AndNot) ? '&' : '|';
  if (op == Operator::AndNot || op == Operator::OrNot) key += '~';
  key += std::to_string(c);
  key += ')';
  return key;
}

double ratio(std::size_t inter, std::size_t uni) {
  return uni == 0 ? 0.0 : static_cast<double>(inter) / static_cast<double>(uni);
}

// A beam member with its dataset-wide mask and the counts the fused
// candidate scorer needs.
struct Member {
  ScoredExplanation scored;
  std::string key;
  MaskVolume mask;
  std::size_t count = 0;       // |G_F|
  std::size_t unit_inter = 0;  // |M ∩ G_F|
};

struct Candidate {
  double iou;
  int parent;  // -1 for a carried-over beam member
  std::size_t index;  // member index or concept id
  Operator op;
  std::string key;
};

class BeamRunner {
 public:
  BeamRunner(const SearchContext& ctx, const SearchConfig& cfg) : ctx_(ctx), cfg_(cfg) {
    const auto& m = ctx.unit().masks;
    unit_words_ = m.words();
    unit_count_ = m.popcount();
    frame_count_ = popcount_words(ctx.index().layout()->valid());
    for (auto c : ctx.concepts()) {
      auto words = ctx.index().concept_mask(c).words();
      concept_count_.push_back(popcount_words(words));
      concept_inter_.push_back(popcount_and(words, unit_words_));
    }
  }

  BeamState run() {
    BeamState state;
    std::vector<double> history;
    init_atoms();
    record(state, 1, history);
    for (int k = 2; k <= cfg_.max_length; ++k) {
      step();
      record(state, k, history);
      if (should_stop(history)) {
        state.stopped_at = k;
        break;
      }
    }
    for (auto& m : beam_) state.beam.push_back(m.scored);
    return state;
  }

 private:
  bool should_stop(const std::vector<double>& history) const {
    if (cfg_.stopping.kind == StoppingRule::Kind::None || history.empty()) return false;
    return stopping_check(history, cfg_.stopping.epsilon, cfg_.stopping.patience) == StopDecision::Stop;
  }

  Member make_member(LogicalForm form, std::string key) const {
    auto mask = eval_form_volume(form, ctx_.index());
    std::size_t count = mask.popcount();
    std::size_t inter = popcount_and(mask.words(), unit_words_);
    int length = form.length();
    return Member{ScoredExplanation{std::move(form), length, ratio(inter, unit_count_ + count - inter), std::nullopt},
                  std::move(key), std::move(mask), count, inter};
  }

  void init_atoms() {
    auto concepts = ctx_.concepts();
    std::vector<std::size_t> order(concepts.size());
    std::vector<double> iou(concepts.size());
    for (std::size_t i = 0; i < concepts.size(); ++i) {
      order[i] = i;
      iou[i] = ratio(concept_inter_[i], unit_count_ + concept_count_[i] - concept_inter_[i]);
    }
    std::stable_sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) { return iou[a] > iou[b]; });
    order.resize(std::min<std::size_t>(order.size(), static_cast<std::size_t>(cfg_.beam_size)));
    for (auto i : order) beam_.push_back(make_member(LogicalForm::leaf(concepts[i]), std::to_string(concepts[i])));
  }

  void step() {
    auto concepts = ctx_.concepts();
    std::vector<Candidate> candidates;
    std::unordered_set<std::string> seen;
    for (std::size_t i = 0; i < beam_.size(); ++i) {
      seen.insert(beam_[i].key);
      candidates.push_back(Candidate{beam_[i].scored.iou, -1, i, Operator::And, {}});
    }

    for (std::size_t p = 0; p < beam_.size(); ++p) {
      const auto& parent = beam_[p];
      auto f = parent.mask.words();
      for (std::size_t ci = 0; ci < concepts.size(); ++ci) {
        auto c = ctx_.index().concept_mask(concepts[ci]).words();
        // One pass gives |F∩c| and |M∩F∩c|; every operator's counts follow
        // from those plus per-member and per-concept totals.
        std::size_t fc = 0;
        std::size_t mfc = 0;
        for (std::size_t w = 0; w < f.size(); ++w) {
          Word both = f[w] & c[w];
          fc += static_cast<std::size_t>(std::popcount(both));
          mfc += static_cast<std::size_t>(std::popcount(both & unit_words_[w]));
        }
        for (auto op : cfg_.operators) {
          std::size_t g = 0;
          std::size_t inter = 0;
          switch (op) {
            case Operator::And:
              g = fc;
              inter = mfc;
              break;
            case Operator::Or:
              g = parent.count + concept_count_[ci] - fc;
              inter = parent.unit_inter + concept_inter_[ci] - mfc;
              break;
            case Operator::AndNot:
              g = parent.count - fc;
              inter = parent.unit_inter - mfc;
              break;
            case Operator::OrNot:
              g = frame_count_ - concept_count_[ci] + fc;
              inter = unit_count_ - concept_inter_[ci] + mfc;
              break;
          }
          auto key = combined_key(parent.key, concepts[ci], op);
          if (!seen.insert(key).second) continue;
          candidates.push_back(
              Candidate{ratio(inter, unit_count_ + g - inter), static_cast<int>(p), concepts[ci], op, std::move(key)});
        }
      }
    }

    std::stable_sort(candidates.begin(), candidates.end(),
                     [](const Candidate& a, const Candidate& b) { return a.iou > b.iou; });
    candidates.resize(std::min<std::size_t>(candidates.size(), static_cast<std::size_t>(cfg_.beam_size)));

    std::vector<Member> next;
    next.reserve(candidates.size());
    for (auto& cand : candidates) {
      if (cand.parent < 0) {
        next.push_back(beam_[cand.index]);
      } else {
        auto form = combine(beam_[static_cast<std::size_t>(cand.parent)].scored.form,
                            static_cast<ConceptId>(cand.index), cand.op);
        next.push_back(make_member(std::move(form), std::move(cand.key)));
      }
    }
    beam_ = std::move(next);
  }

  void record(BeamState& state, int k, std::vector<double>& history) {
    if (cfg_.detacc_all) {
      for (auto& m : beam_)
        if (!m.scored.detacc) m.scored.detacc = detacc_score(ctx_.unit().masks, m.mask);
    }
    auto best = beam_.front().scored;
    if (!best.detacc) best.detacc = detacc_score(ctx_.unit().masks, beam_.front().mask);
    history.push_back(detacc_or_zero(best.detacc));
    state.per_length_best.insert_or_assign(k, std::move(best));
  }

  const SearchContext& ctx_;
  const SearchConfig& cfg_;
  std::span<const Word> unit_words_;
  std::size_t unit_count_ = 0;
  std::size_t frame_count_ = 0;
  std::vector<std::size_t> concept_count_;
  std::vector<std::size_t> concept_inter_;
  std::vector<Member> beam_;
};

}  // namespace

ScoredExplanation atomic_search(const SearchContext& ctx) {
  if (ctx.concepts().empty()) throw Error(ErrorKind::EmptyCatalog, "no searchable concepts");
  std::optional<ScoredExplanation> best;
  for (auto id : ctx.concepts()) {
    auto s = ctx.score(LogicalForm::leaf(id), false);
    if (!best || s.iou > best->iou) best = std::move(s);
  }
  best->detacc = ctx.detacc(best->form);
  return *best;
}

BeamState beam_search(const SearchContext& ctx, const SearchConfig& config) {
  config.validate();
  if (ctx.concepts().empty()) throw Error(ErrorKind::EmptyCatalog, "no searchable concepts");
  return BeamRunner(ctx, config).run();
}

std::size_t candidate_space_size(std::size_t concept_count, std::size_t operator_count, int max_length) {
  std::size_t total = 0;
  std::size_t level = concept_count;
  for (int k = 1; k <= max_length; ++k) {
    total += level;
    level *= concept_count * operator_count;
  }
  return total;
}

ScoredExplanation exhaustive_search(const SearchContext& ctx, int max_length, std::span<const Operator> operators) {
  if (ctx.concepts().empty()) throw Error(ErrorKind::EmptyCatalog, "no searchable concepts");
  if (ctx.concepts().size() > kExhaustiveMaxConcepts || max_length > kExhaustiveMaxLength)
    throw Error(ErrorKind::InstanceTooLarge,
                "exhaustive search is limited to " + std::to_string(kExhaustiveMaxConcepts) + " concepts and length " +
                    std::to_string(kExhaustiveMaxLength));
  if (max_length < 1 || operators.empty()) throw Error(ErrorKind::InvalidArgument, "empty search space");

  std::optional<ScoredExplanation> best;
  auto consider = [&](const LogicalForm& f) {
    auto s = ctx.score(f, false);
    if (!best || s.iou > best->iou) best = std::move(s);
  };

  std::vector<LogicalForm> level;
  for (auto c : ctx.concepts()) level.push_back(LogicalForm::leaf(c));
  for (const auto& f : level) consider(f);
  for (int k = 2; k <= max_length; ++k) {
    std::vector<LogicalForm> next;
    next.reserve(level.size() * ctx.concepts().size() * operators.size());
    for (const auto& f : level)
      for (auto c : ctx.concepts())
        for (auto op : operators) next.push_back(combine(f, c, op));
    for (const auto& f : next) consider(f);
    level = std::move(next);
  }
  best->detacc = ctx.detacc(best->form);
  return *best;
}

ScoredExplanation select_explanation(const BeamState& state, const SearchContext& ctx, SelectionRule rule) {
  if (state.per_length_best.empty()) throw Error(ErrorKind::InvalidArgument, "beam state has no results");
  if (rule == SelectionRule::MaxIou) {
    auto out = state.per_length_best.rbegin()->second;
    if (!out.detacc) out.detacc = ctx.detacc(out.form);
    return out;
  }
  std::optional<ScoredExplanation> best;
  for (const auto& [k, cand] : state.per_length_best) {
    auto c = cand;
    if (!c.detacc) c.detacc = ctx.detacc(c.form);
    if (!best) {
      best = std::move(c);
      continue;
    }
    double a = detacc_or_zero(c.detacc);
    double b = detacc_or_zero(best->detacc);
    if (a > b || (a == b && c.length < best->length)) best = std::move(c);
  }
  return *best;
}

StopDecision stopping_check(std::span<const double> history, double epsilon, int patience) {
  if (history.size() < 2) return StopDecision::Continue;
  double running_max = history.front();
  int consecutive = 0;
  for (std::size_t i = 1; i < history.size(); ++i) {
    if (running_max - history[i] > epsilon)
      ++consecutive;
    else
      consecutive = 0;
    running_max = std::max(running_max, history[i]);
  }
  return consecutive >= patience ? StopDecision::Stop : StopDecision::Continue;
}

}  // namespace dissect
