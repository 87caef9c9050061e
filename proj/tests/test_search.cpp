#include <algorithm>

#include "doctest.h"
#include "dissect/errors.hpp"
#include "dissect/search.hpp"
#include "test_support.hpp"

using namespace dissect;
namespace t = dissect::testing;

namespace {

struct Instance {
  AnnotationStore store;
  std::unique_ptr<ConceptIndex> index;
  UnitMaskVolume unit;
  std::vector<ConceptId> concepts;

  SearchContext ctx() const { return SearchContext(*index, unit, concepts); }
};

Instance random_instance(std::mt19937_64& rng, std::uint32_t concept_count, std::uint32_t images = 8,
                         Frame frame = Frame{8, 8}) {
  Instance in;
  in.store = t::random_store(rng, images, frame, concept_count);
  in.index = std::make_unique<ConceptIndex>(in.store, concept_count);
  in.unit.masks = MaskVolume(in.index->layout());
  for (std::size_t i = 0; i < images; ++i) in.unit.masks.set_image(i, t::random_mask(rng, frame, 0.35));
  for (ConceptId c = 0; c < concept_count; ++c) in.concepts.push_back(c);
  return in;
}

// Unit mask set to exactly G_E of `form`.
void set_unit_to(Instance& in, const LogicalForm& form) { in.unit.masks = eval_form_volume(form, *in.index); }

}  // namespace

TEST_CASE("atomic_search picks the exact match and breaks ties by id") {
  std::mt19937_64 rng(1);
  auto in = random_instance(rng, 5);
  set_unit_to(in, LogicalForm::leaf(3));
  auto best = atomic_search(in.ctx());
  CHECK(best.form == LogicalForm::leaf(3));
  CHECK(best.iou == 1.0);
  CHECK(best.length == 1);

  // concepts 1 and 4 share a mask: lower id wins
  for (auto& [id, ann] : in.store.images) {
    ann.masks.erase(4);
    if (ann.masks.count(1)) ann.masks.emplace(4, ann.masks.at(1));
  }
  in.index = std::make_unique<ConceptIndex>(in.store, 5);
  set_unit_to(in, LogicalForm::leaf(4));
  CHECK(atomic_search(in.ctx()).form == LogicalForm::leaf(1));
}

TEST_CASE("atomic_search equals a brute-force max") {
  std::mt19937_64 rng(2);
  for (int trial = 0; trial < 20; ++trial) {
    auto in = random_instance(rng, 5);
    auto ctx = in.ctx();
    double best = -1;
    ConceptId arg = 0;
    for (ConceptId c = 0; c < 5; ++c) {
      double v = iou_score(in.unit, LogicalForm::leaf(c), *in.index);
      if (v > best) best = v, arg = c;
    }
    auto got = atomic_search(ctx);
    CHECK(got.iou == best);
    CHECK(got.form == LogicalForm::leaf(arg));
  }
}

TEST_CASE("empty concept set is an error") {
  std::mt19937_64 rng(3);
  auto in = random_instance(rng, 3);
  in.concepts.clear();
  try {
    atomic_search(in.ctx());
    FAIL("expected EmptyCatalog");
  } catch (const Error& e) {
    CHECK(e.kind() == ErrorKind::EmptyCatalog);
  }
  CHECK_THROWS_AS(beam_search(in.ctx(), SearchConfig{}), Error);
}

TEST_CASE("beam_search with n = 1 equals atomic_search") {
  std::mt19937_64 rng(4);
  for (int trial = 0; trial < 10; ++trial) {
    auto in = random_instance(rng, 6);
    SearchConfig cfg;
    cfg.max_length = 1;
    auto state = beam_search(in.ctx(), cfg);
    REQUIRE(state.per_length_best.size() == 1);
    auto atomic = atomic_search(in.ctx());
    CHECK(state.per_length_best.at(1).form == atomic.form);
    CHECK(state.per_length_best.at(1).iou == atomic.iou);
  }
}

TEST_CASE("beam with a full-size beam matches exhaustive search") {
  std::mt19937_64 rng(5);
  for (int trial = 0; trial < 25; ++trial) {
    std::uint32_t n_concepts = 2 + static_cast<std::uint32_t>(rng() % 5);
    auto in = random_instance(rng, n_concepts);
    SearchConfig cfg;
    cfg.max_length = 1 + static_cast<int>(rng() % 3);
    cfg.beam_size = static_cast<int>(candidate_space_size(n_concepts, cfg.operators.size(), cfg.max_length));
    auto state = beam_search(in.ctx(), cfg);
    auto oracle = exhaustive_search(in.ctx(), cfg.max_length, cfg.operators);
    CHECK(state.per_length_best.rbegin()->second.iou == oracle.iou);
  }
}

TEST_CASE("exhaustive_search finds a planted conjunction") {
  std::mt19937_64 rng(6);
  auto in = random_instance(rng, 2);
  auto target = LogicalForm::conjunction(LogicalForm::leaf(0), LogicalForm::leaf(1));
  set_unit_to(in, target);
  std::vector<Operator> ops{Operator::And, Operator::Or, Operator::AndNot};
  auto best = exhaustive_search(in.ctx(), 2, ops);
  CHECK(best.iou == 1.0);
  CHECK(exhaustive_search(in.ctx(), 1, ops).form == atomic_search(in.ctx()).form);
}

TEST_CASE("exhaustive_search guards the instance size") {
  std::mt19937_64 rng(7);
  auto big = random_instance(rng, 11, 2, Frame{4, 4});
  std::vector<Operator> ops{Operator::And};
  try {
    exhaustive_search(big.ctx(), 2, ops);
    FAIL("expected InstanceTooLarge");
  } catch (const Error& e) {
    CHECK(e.kind() == ErrorKind::InstanceTooLarge);
  }
  auto small = random_instance(rng, 3, 2, Frame{4, 4});
  CHECK_THROWS_AS(exhaustive_search(small.ctx(), 4, ops), Error);
}

TEST_CASE("beam invariants on random instances") {
  std::mt19937_64 rng(8);
  for (int trial = 0; trial < 30; ++trial) {
    auto in = random_instance(rng, 6);
    SearchConfig cfg;
    cfg.beam_size = 1 + static_cast<int>(rng() % 6);
    cfg.max_length = 1 + static_cast<int>(rng() % 4);
    cfg.operators = {Operator::And, Operator::Or, Operator::AndNot, Operator::OrNot};
    auto ctx = in.ctx();
    auto state = beam_search(ctx, cfg);
    CHECK(state.per_length_best.size() == static_cast<std::size_t>(cfg.max_length));
    CHECK(state.beam.size() <= static_cast<std::size_t>(cfg.beam_size));
    for (std::size_t i = 1; i < state.beam.size(); ++i) CHECK(state.beam[i - 1].iou >= state.beam[i].iou);
    double prev = -1;
    for (const auto& [k, best] : state.per_length_best) {
      CHECK(best.iou >= prev);
      prev = best.iou;
      CHECK(best.length == form_length(best.form));
      CHECK(best.length <= k);
      // recomputable through the general route
      auto again = ctx.score(best.form);
      CHECK(again.iou == best.iou);
      CHECK(again.detacc == best.detacc);
    }
    // beam members are structurally distinct
    for (std::size_t i = 0; i < state.beam.size(); ++i)
      for (std::size_t j = i + 1; j < state.beam.size(); ++j) CHECK_FALSE(state.beam[i].form == state.beam[j].form);
  }
}

TEST_CASE("beam_search is deterministic") {
  std::mt19937_64 rng(9);
  auto in = random_instance(rng, 6);
  SearchConfig cfg;
  auto a = beam_search(in.ctx(), cfg);
  auto b = beam_search(in.ctx(), cfg);
  REQUIRE(a.beam.size() == b.beam.size());
  for (std::size_t i = 0; i < a.beam.size(); ++i) CHECK(a.beam[i].form == b.beam[i].form);
}

TEST_CASE("select_explanation rules") {
  std::mt19937_64 rng(10);
  auto in = random_instance(rng, 3);
  auto ctx = in.ctx();
  auto mk = [](ConceptId c, int len, double iou, std::optional<double> d) {
    auto f = LogicalForm::leaf(c);
    for (int i = 1; i < len; ++i) f = LogicalForm::conjunction(f, LogicalForm::leaf(c));
    return ScoredExplanation{f, len, iou, d};
  };

  BeamState single;
  single.per_length_best.emplace(1, mk(0, 1, 0.2, 0.3));
  CHECK(select_explanation(single, ctx, SelectionRule::MaxDetAcc).form == single.per_length_best.at(1).form);
  CHECK(select_explanation(single, ctx, SelectionRule::MaxIou).form == single.per_length_best.at(1).form);

  BeamState s;
  s.per_length_best.emplace(1, mk(0, 1, 0.1, 0.4));
  s.per_length_best.emplace(2, mk(1, 2, 0.2, 0.9));
  s.per_length_best.emplace(3, mk(2, 3, 0.3, 0.7));
  CHECK(select_explanation(s, ctx, SelectionRule::MaxDetAcc).length == 2);
  CHECK(select_explanation(s, ctx, SelectionRule::MaxIou).length == 3);

  BeamState tie;
  tie.per_length_best.emplace(1, mk(0, 1, 0.1, 0.5));
  tie.per_length_best.emplace(2, mk(1, 2, 0.2, 0.5));
  tie.per_length_best.emplace(3, mk(2, 3, 0.3, 0.5));
  CHECK(select_explanation(tie, ctx, SelectionRule::MaxDetAcc).length == 1);
}

TEST_CASE("stopping_check examples") {
  std::vector<double> one{0.5};
  CHECK(stopping_check(one, 0.0, 1) == StopDecision::Continue);
  CHECK(stopping_check(one, 0.3, 4) == StopDecision::Continue);
  std::vector<double> drop{0.8, 0.6};
  CHECK(stopping_check(drop, 0.0, 1) == StopDecision::Stop);
  CHECK(stopping_check(drop, 0.25, 1) == StopDecision::Continue);
  CHECK(stopping_check(drop, 0.0, 2) == StopDecision::Continue);
  std::vector<double> flat{0.8, 0.8};
  CHECK(stopping_check(flat, 0.0, 1) == StopDecision::Continue);
  std::vector<double> two{0.9, 0.5, 0.6};
  CHECK(stopping_check(two, 0.0, 2) == StopDecision::Stop);
  std::vector<double> recovered{0.9, 0.5, 0.95};
  CHECK(stopping_check(recovered, 0.0, 1) == StopDecision::Continue);
}

TEST_CASE("detacc-drop stopping truncates the search") {
  std::mt19937_64 rng(11);
  int stopped = 0;
  for (int trial = 0; trial < 40; ++trial) {
    auto in = random_instance(rng, 6);
    SearchConfig cfg;
    cfg.max_length = 4;
    cfg.stopping = StoppingRule{StoppingRule::Kind::DetAccDrop, 0.0, 1};
    auto state = beam_search(in.ctx(), cfg);
    std::vector<double> history;
    for (const auto& [k, best] : state.per_length_best) history.push_back(detacc_or_zero(best.detacc));
    if (state.stopped_at) {
      ++stopped;
      CHECK(*state.stopped_at == state.per_length_best.rbegin()->first);
      CHECK(stopping_check(history, 0.0, 1) == StopDecision::Stop);
    } else {
      CHECK(state.per_length_best.size() == 4);
    }
    // no earlier prefix would have stopped
    for (std::size_t len = 1; len < history.size(); ++len)
      CHECK(stopping_check(std::span<const double>(history).first(len), 0.0, 1) == StopDecision::Continue);
  }
  CHECK(stopped > 0);
}

TEST_CASE("SearchConfig validation") {
  SearchConfig cfg;
  CHECK_NOTHROW(cfg.validate());
  cfg.beam_size = 0;
  CHECK_THROWS_AS(cfg.validate(), Error);
  cfg = SearchConfig{};
  cfg.stopping.patience = 0;
  CHECK_THROWS_AS(cfg.validate(), Error);
  cfg = SearchConfig{};
  cfg.stopping.epsilon = -1;
  CHECK_THROWS_AS(cfg.validate(), Error);
  cfg = SearchConfig{};
  cfg.operators.clear();
  CHECK_THROWS_AS(cfg.validate(), Error);
}

TEST_CASE("detacc_all scores the whole beam") {
  std::mt19937_64 rng(12);
  auto in = random_instance(rng, 5);
  SearchConfig cfg;
  cfg.detacc_all = true;
  auto state = beam_search(in.ctx(), cfg);
  auto ctx = in.ctx();
  for (const auto& m : state.beam) CHECK(m.detacc == ctx.detacc(m.form));
}
