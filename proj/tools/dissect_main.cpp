// dissect: compositional explanations for network units.
//
//   dissect synth    --out-dir DIR ...           generate a synthetic fixture
//   dissect dissect  --masks --acts --catalog     explain every unit -> JSON
//   dissect score    --unit U --form "a AND b"    IoU and DetAcc of one form
//   dissect report   --in r.json                  CSV summary + correlations

#include <cstdlib>
#include <fstream>
#include <iostream>
#include <map>
#include <sstream>
#include <string>

#include "CLI11.hpp"
#include "dissect/errors.hpp"
#include "dissect/report.hpp"
#include "dissect/synth.hpp"

using namespace dissect;

namespace {

const std::map<std::string, Operator> kOperatorNames{
    {"and", Operator::And}, {"or", Operator::Or}, {"and-not", Operator::AndNot}, {"or-not", Operator::OrNot}};

std::vector<Operator> parse_operators(const std::string& text) {
  std::vector<Operator> ops;
  std::stringstream ss(text);
  std::string item;
  while (std::getline(ss, item, ',')) {
    auto it = kOperatorNames.find(item);
    if (it == kOperatorNames.end()) throw Error(ErrorKind::InvalidArgument, "unknown operator '" + item + "'");
    ops.push_back(it->second);
  }
  if (ops.empty()) throw Error(ErrorKind::InvalidArgument, "operator set is empty");
  return ops;
}

UpsampleMode parse_upsample(const std::string& text) {
  return text == "nearest" ? UpsampleMode::Nearest : UpsampleMode::BilinearCorners;
}

unsigned default_jobs() {
  if (const char* env = std::getenv("DISSECT_JOBS")) {
    try {
      int n = std::stoi(env);
      if (n >= 1) return static_cast<unsigned>(n);
    } catch (const std::exception&) {
    }
    throw Error(ErrorKind::InvalidArgument, std::string("DISSECT_JOBS must be a positive integer, got '") + env + "'");
  }
  return 1;
}

void write_text(const std::string& path, const std::string& text) {
  if (path.empty() || path == "-") {
    std::cout << text;
    return;
  }
  std::ofstream out(path, std::ios::binary);
  if (!out) throw Error(ErrorKind::Io, "cannot write '" + path + "'");
  out << text;
  if (!out) throw Error(ErrorKind::Io, "failed writing '" + path + "'");
}

std::string read_text(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw Error(ErrorKind::Io, "cannot open '" + path + "'");
  std::ostringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

struct InputFlags {
  std::string masks;
  std::string acts;
  std::string catalog;
};

void add_input_flags(CLI::App* cmd, InputFlags& in) {
  cmd->add_option("--masks", in.masks, "Annotation masks (CEXM)")->required();
  cmd->add_option("--acts", in.acts, "Unit activations (CEXA)")->required();
  cmd->add_option("--catalog", in.catalog, "Concept catalog CSV (concept_id,name,category)")->required();
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Compositional neuron explanations scored by IoU and Detection Accuracy"};
  app.require_subcommand(1);

  // dissect
  InputFlags dissect_in;
  std::string dissect_out;
  int beam_size = 10;
  int max_length = 3;
  double quantile = kDefaultQuantile;
  std::string select = "iou";
  std::string stop = "none";
  double epsilon = 0.0;
  int patience = 1;
  std::string operators = "and,or,and-not";
  std::string upsample_mode = "bilinear-corners";
  std::uint32_t min_samples = kDefaultMinSamples;
  bool detacc_all = false;
  unsigned jobs = 0;
  std::size_t sample_size = 0;
  std::uint64_t sample_seed = 0;

  auto* dissect_cmd = app.add_subcommand("dissect", "Explain every unit and write a JSON report");
  add_input_flags(dissect_cmd, dissect_in);
  dissect_cmd->add_option("--out", dissect_out, "Report path ('-' for stdout)")->required();
  dissect_cmd->add_option("--beam-size", beam_size, "Beam size B")->capture_default_str()->check(CLI::PositiveNumber);
  dissect_cmd->add_option("--max-length", max_length, "Maximum form length n")
      ->capture_default_str()
      ->check(CLI::PositiveNumber);
  dissect_cmd->add_option("--quantile", quantile, "Fraction of activations above the unit threshold")
      ->capture_default_str()
      ->check(CLI::Range(0.0, 1.0));
  dissect_cmd->add_option("--select", select, "Selection rule")
      ->capture_default_str()
      ->check(CLI::IsMember({"iou", "detacc"}));
  dissect_cmd->add_option("--stop", stop, "Stopping rule")
      ->capture_default_str()
      ->check(CLI::IsMember({"none", "detacc-drop"}));
  dissect_cmd->add_option("--epsilon", epsilon, "DetAcc drop tolerance for detacc-drop")
      ->capture_default_str()
      ->check(CLI::NonNegativeNumber);
  dissect_cmd->add_option("--patience", patience, "Consecutive drops before stopping")
      ->capture_default_str()
      ->check(CLI::PositiveNumber);
  dissect_cmd->add_option("--operators", operators, "Comma list of and,or,and-not,or-not")->capture_default_str();
  dissect_cmd->add_option("--upsample", upsample_mode, "Activation upsampling")
      ->capture_default_str()
      ->check(CLI::IsMember({"bilinear-corners", "nearest"}));
  dissect_cmd->add_option("--min-samples", min_samples, "Minimum images per searchable concept")
      ->capture_default_str();
  dissect_cmd->add_flag("--detacc-all", detacc_all, "Score DetAcc for the whole final beam");
  dissect_cmd->add_option("--jobs", jobs, "Units searched in parallel (default: $DISSECT_JOBS or 1)")
      ->check(CLI::PositiveNumber);
  dissect_cmd->add_option("--threshold-sample", sample_size,
                          "Approximate threshold from a reservoir of this many values (>= 1000000; 0 = exact)")
      ->capture_default_str();
  dissect_cmd->add_option("--threshold-seed", sample_seed, "Reservoir sampling seed")->capture_default_str();

  // score
  InputFlags score_in;
  UnitId score_unit = 0;
  std::string score_form;
  double score_quantile = kDefaultQuantile;
  std::string score_upsample = "bilinear-corners";
  auto* score_cmd = app.add_subcommand("score", "Print IoU and DetAcc of one form for one unit");
  add_input_flags(score_cmd, score_in);
  score_cmd->add_option("--unit", score_unit, "Unit id")->required();
  score_cmd->add_option("--form", score_form, "Logical form, e.g. \"water OR river AND NOT sky\"")->required();
  score_cmd->add_option("--quantile", score_quantile, "Fraction of activations above the unit threshold")
      ->capture_default_str()
      ->check(CLI::Range(0.0, 1.0));
  score_cmd->add_option("--upsample", score_upsample, "Activation upsampling")
      ->capture_default_str()
      ->check(CLI::IsMember({"bilinear-corners", "nearest"}));

  // report
  std::string report_in;
  std::string report_out;
  auto* report_cmd = app.add_subcommand("report", "Summarize a dissect report as CSV with correlations");
  report_cmd->add_option("--in", report_in, "Report JSON from `dissect`")->required();
  report_cmd->add_option("--out", report_out, "CSV path (default stdout)");

  // synth
  SynthSpec spec;
  std::string synth_dir;
  std::uint32_t synth_units = 1;
  int synth_length = 2;
  std::string synth_form;
  std::string synth_operators = "and,or,and-not";
  auto* synth_cmd = app.add_subcommand("synth", "Generate a synthetic fixture with known explanations");
  synth_cmd->add_option("--out-dir", synth_dir, "Output directory")->required();
  synth_cmd->add_option("--seed", spec.seed, "Random seed")->capture_default_str();
  synth_cmd->add_option("--images", spec.image_count, "Image count")->capture_default_str();
  synth_cmd->add_option("--height", spec.annotation.height, "Annotation height")->capture_default_str();
  synth_cmd->add_option("--width", spec.annotation.width, "Annotation width")->capture_default_str();
  synth_cmd->add_option("--act-height", spec.activation.height, "Activation grid height")->capture_default_str();
  synth_cmd->add_option("--act-width", spec.activation.width, "Activation grid width")->capture_default_str();
  synth_cmd->add_option("--concepts", spec.concept_count, "Concept count")->capture_default_str();
  synth_cmd->add_option("--density", spec.concept_density, "Per-image concept probability")->capture_default_str();
  synth_cmd->add_option("--units", synth_units, "Unit count")->capture_default_str();
  synth_cmd->add_option("--length", synth_length, "Length of random ground-truth forms")->capture_default_str();
  synth_cmd->add_option("--form", synth_form, "Ground-truth form shared by all units (overrides --length)");
  synth_cmd->add_option("--operators", synth_operators, "Operators used by random ground-truth forms")
      ->capture_default_str();
  synth_cmd->add_option("--sigma", spec.noise_sigma, "Gaussian noise sigma")->capture_default_str();
  synth_cmd->add_option("--gain", spec.activation_gain, "Activation gain")->capture_default_str();

  try {
    app.parse(argc, argv);
  } catch (const CLI::CallForHelp& e) {
    return app.exit(e);
  } catch (const CLI::CallForAllHelp& e) {
    return app.exit(e);
  } catch (const CLI::ParseError& e) {
    app.exit(e);
    return 1;
  }

  try {
    if (*dissect_cmd) {
      DissectOptions opts;
      opts.search.beam_size = beam_size;
      opts.search.max_length = max_length;
      opts.search.operators = parse_operators(operators);
      opts.search.selection = select == "detacc" ? SelectionRule::MaxDetAcc : SelectionRule::MaxIou;
      opts.search.stopping.kind = stop == "detacc-drop" ? StoppingRule::Kind::DetAccDrop : StoppingRule::Kind::None;
      opts.search.stopping.epsilon = epsilon;
      opts.search.stopping.patience = patience;
      opts.search.detacc_all = detacc_all;
      opts.threshold.quantile = quantile;
      opts.threshold.upsample = parse_upsample(upsample_mode);
      opts.threshold.sample_size = sample_size;
      opts.threshold.sample_seed = sample_seed;
      opts.min_samples = min_samples;
      opts.jobs = jobs != 0 ? jobs : default_jobs();
      opts.search.validate();

      auto inputs = load_inputs(dissect_in.masks, dissect_in.acts, dissect_in.catalog, opts.min_samples);
      auto reports = dissect_all(inputs, opts);
      write_text(dissect_out, reports_to_json(reports));
    } else if (*score_cmd) {
      auto catalog = load_catalog(score_in.catalog);
      auto masks = load_masks(score_in.masks);
      auto acts = load_activations(score_in.acts);
      check_image_sets(masks, acts);
      compute_support(catalog, masks);
      auto form = parse_form(score_form, catalog);
      ConceptIndex index(masks, catalog.size());
      ThresholdOptions topts;
      topts.quantile = score_quantile;
      topts.upsample = parse_upsample(score_upsample);
      auto unit = build_unit_masks(acts.unit(score_unit), index.layout(), topts);
      auto g = eval_form_volume(form, index);
      auto detacc = detacc_score(unit.masks, g);
      std::cout << "iou=" << format_score(iou_score(unit.masks, g))
                << " detacc=" << (detacc ? format_score(*detacc) : std::string("no-support")) << '\n';
    } else if (*report_cmd) {
      auto reports = reports_from_json(read_text(report_in));
      write_text(report_out, summarize_reports(reports));
    } else if (*synth_cmd) {
      auto ops = parse_operators(synth_operators);
      if (!synth_form.empty()) {
        ConceptCatalog names;
        for (std::uint32_t c = 0; c < spec.concept_count; ++c) names.add("c" + std::to_string(c), Category::Object);
        spec.ground_truth = parse_form(synth_form, names);
      }
      auto fixture = gen_fixture(spec, synth_units, synth_length, ops);
      save_fixture(fixture, synth_dir);
    }
  } catch (const Error& e) {
    std::cerr << "dissect: " << to_string(e.kind()) << ": " << e.what() << '\n';
    return exit_code(e.kind());
  } catch (const std::exception& e) {
    std::cerr << "dissect: " << e.what() << '\n';
    return 2;
  }
  return 0;
}
