#include "amd/checkpoint.hpp"
#include "amd/config.hpp"
#include "amd/corpus.hpp"
#include "amd/datagen.hpp"
#include "amd/image_io.hpp"
#include "amd/metrics.hpp"
#include "amd/trainer.hpp"

#include <CLI11.hpp>
#include <json.hpp>

#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <optional>
#include <string>
#include <vector>

namespace fs = std::filesystem;

namespace {

// Last-resort seed default, below config files and flags.
uint64_t env_seed() {
  const char* v = std::getenv("AMD_SEED");
  if (!v || !*v) return 0;
  try {
    size_t pos = 0;
    unsigned long long parsed = std::stoull(v, &pos);
    if (pos != std::string(v).size())
      throw amd::ValidationError(std::string("AMD_SEED: not an unsigned integer ('") +
                                 v + "')");
    return parsed;
  } catch (const std::logic_error&) {
    throw amd::ValidationError(std::string("AMD_SEED: not an unsigned integer ('") + v +
                               "')");
  }
}

std::vector<std::string> split_domains(const std::string& csv) {
  std::vector<std::string> out;
  std::string cur;
  for (char c : csv) {
    if (c == ',') {
      if (!cur.empty()) out.push_back(cur);
      cur.clear();
    } else if (!std::isspace(static_cast<unsigned char>(c))) {
      cur.push_back(c);
    }
  }
  if (!cur.empty()) out.push_back(cur);
  return out;
}

std::vector<amd::MediaSample> domain_subset(const amd::Corpus& corpus,
                                            const std::string& domain,
                                            const char* flag) {
  std::vector<amd::MediaSample> out;
  for (const auto& s : corpus.samples)
    if (s.domain == domain) out.push_back(s);
  if (out.empty())
    throw amd::ValidationError(std::string(flag) + ": no samples in domain '" + domain +
                               "'");
  return out;
}

struct Args {
  std::string config, out, corpus, checkpoint, train_domain, eval_domains;
  std::string image, text;
  std::optional<uint64_t> seed;
  std::optional<int> steps;
  bool deterministic = false;
};

int cmd_generate(const Args& a) {
  amd::GenConfig gen;
  gen.seed = env_seed();
  if (!a.config.empty()) amd::apply_gen_section(amd::parse_config_file(a.config), &gen);
  if (a.seed) gen.seed = *a.seed;
  if (a.out.empty()) throw amd::ValidationError("--out: output directory required");
  gen.validate();

  amd::Corpus corpus = amd::generate_corpus_to_dir(gen, a.out);
  std::cout << "wrote " << corpus.samples.size() << " samples to " << a.out << "\n";
  return 0;
}

int cmd_train(const Args& a) {
  amd::TrainConfig tc;
  tc.seed = env_seed();
  tc.model.seed = tc.seed;
  if (!a.config.empty()) {
    amd::ConfigFile f = amd::parse_config_file(a.config);
    amd::apply_train_section(f, &tc);
    amd::apply_model_section(f, &tc.model);
  }
  if (a.seed) {
    tc.seed = *a.seed;
    tc.model.seed = *a.seed;
  }
  if (a.steps) tc.steps = *a.steps;
  if (a.deterministic) tc.deterministic = true;
  // A short run with the stock schedule would put the warmup past the end;
  // keep the default shape (warmup = half the run) unless a file or flag
  // pinned the warmup explicitly.
  if (!tc.warmup_explicit && tc.warmup > tc.steps) tc.warmup = std::max(1, tc.steps / 2);
  tc.validate();

  if (a.corpus.empty()) throw amd::ValidationError("--corpus: training corpus required");
  if (a.out.empty()) throw amd::ValidationError("--out: output directory required");
  amd::Corpus corpus = amd::load_corpus(a.corpus);
  if (!a.train_domain.empty()) {
    corpus.samples = domain_subset(corpus, a.train_domain, "--train-domain");
  }
  std::vector<amd::TrainItem> items = amd::load_items(corpus);

  amd::Model<float> model(tc.model);
  model.init(tc.model.seed);

  fs::create_directories(a.out);
  std::ofstream metrics(fs::path(a.out) / "metrics.jsonl");
  if (!metrics) throw amd::LoadError("cannot open metrics log in " + a.out);
  amd::TrainResult result = amd::train(model, items, tc, &metrics);

  std::string ckpt = (fs::path(a.out) / "checkpoint.amdc").string();
  amd::save_checkpoint(model, ckpt, true);
  const amd::LossBundle& last = result.history.back();
  std::cout << "trained " << tc.steps << " steps on " << items.size()
            << " samples; final total loss " << last.total << "\n"
            << "checkpoint: " << ckpt << "\n";
  return 0;
}

int cmd_eval(const Args& a) {
  if (a.checkpoint.empty()) throw amd::ValidationError("--checkpoint: required");
  if (a.corpus.empty()) throw amd::ValidationError("--corpus: eval corpus required");
  amd::Model<float> model = amd::load_checkpoint(a.checkpoint);
  amd::Corpus corpus = amd::load_corpus(a.corpus);

  std::vector<std::string> domains = split_domains(a.eval_domains);
  if (domains.empty()) {
    for (const auto& s : corpus.samples)
      if (std::find(domains.begin(), domains.end(), s.domain) == domains.end())
        domains.push_back(s.domain);
    std::sort(domains.begin(), domains.end());
  }

  std::vector<std::pair<std::string, std::vector<amd::SampleEval>>> per_domain;
  for (const auto& d : domains) {
    amd::Corpus sub;
    sub.root = corpus.root;
    sub.samples = domain_subset(corpus, d, "--eval-domains");
    per_domain.emplace_back(d, amd::evaluate(model, amd::load_items(sub)));
  }

  amd::EvalReport report = amd::cross_domain_report(per_domain, a.train_domain);
  std::cout << amd::render_report_table(report);
  if (!a.out.empty()) {
    std::ofstream out(a.out);
    if (!out) throw amd::LoadError("cannot write report to " + a.out);
    out << amd::report_to_json(report) << "\n";
    std::cout << "report: " << a.out << "\n";
  }
  return 0;
}

int cmd_infer(const Args& a) {
  if (a.checkpoint.empty()) throw amd::ValidationError("--checkpoint: required");
  amd::Model<float> model = amd::load_checkpoint(a.checkpoint);
  amd::Image image = amd::load_image_file(a.image);
  amd::InferResult r = amd::infer(model, image, a.text);

  nlohmann::ordered_json j;
  j["option"] = std::string(1, r.pred.option);
  j["manipulated"] = r.pred.y_bin_pred;
  j["types"] = {{"face_swap", r.pred.y_mul_pred[amd::kFS]},
                {"face_attribute", r.pred.y_mul_pred[amd::kFA]},
                {"text_fabrication", r.pred.y_mul_pred[amd::kTF]}};
  if (r.pred.bbox_pred)
    j["box"] = {r.pred.bbox_pred->x1, r.pred.bbox_pred->y1, r.pred.bbox_pred->x2,
                r.pred.bbox_pred->y2};
  else
    j["box"] = nullptr;
  if (r.has_scores)
    j["type_scores"] = {{"face_swap", r.type_scores[amd::kFS]},
                        {"face_attribute", r.type_scores[amd::kFA]},
                        {"text_fabrication", r.type_scores[amd::kTF]}};
  j["answer"] = r.pred.raw_text;
  // An untrained model can emit arbitrary bytes; replace anything that is
  // not valid UTF-8 rather than refusing to print.
  std::cout << j.dump(2, ' ', false, nlohmann::json::error_handler_t::replace) << "\n";
  return 0;
}

int cmd_inspect(const Args& a) {
  if (a.corpus.empty()) throw amd::ValidationError("--corpus: required");
  amd::Corpus corpus = amd::load_corpus(a.corpus);
  std::cout << "samples: " << corpus.samples.size() << "\n"
            << amd::render_stats(amd::corpus_stats(corpus.samples));
  return 0;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"manipulation detection and grounding toolkit"};
  app.require_subcommand(1);
  Args a;

  auto add_common = [&](CLI::App* sub) {
    sub->add_option("--config", a.config, "key = value config file with sections");
    sub->add_option("--seed", a.seed, "seed override (beats file and AMD_SEED)");
    sub->add_flag("--deterministic", a.deterministic,
                  "bit-reproducible mode (disables augmentation)");
  };

  CLI::App* gen = app.add_subcommand("generate", "write a synthetic corpus");
  add_common(gen);
  gen->add_option("--out", a.out, "corpus output directory");

  CLI::App* train = app.add_subcommand("train", "train a model on a corpus");
  add_common(train);
  train->add_option("--corpus", a.corpus, "training corpus directory");
  train->add_option("--out", a.out, "output directory (checkpoint + metrics log)");
  train->add_option("--steps", a.steps, "optimizer step count override");
  train->add_option("--train-domain", a.train_domain,
                    "train only on samples from this domain");

  CLI::App* eval = app.add_subcommand("eval", "evaluate a checkpoint over domains");
  add_common(eval);
  eval->add_option("--corpus", a.corpus, "evaluation corpus directory");
  eval->add_option("--checkpoint", a.checkpoint, "checkpoint file");
  eval->add_option("--train-domain", a.train_domain,
                   "domain the checkpoint was trained on (marks the intra row)");
  eval->add_option("--eval-domains", a.eval_domains,
                   "comma-separated domain order for the report");
  eval->add_option("--out", a.out, "write the JSON report here");

  CLI::App* infer = app.add_subcommand("infer", "answer for one image + caption");
  add_common(infer);
  infer->add_option("image", a.image, "image file (.png or .amdt)")->required();
  infer->add_option("text", a.text, "caption text")->required();
  infer->add_option("--checkpoint", a.checkpoint, "checkpoint file");

  CLI::App* inspect = app.add_subcommand("inspect", "print corpus statistics");
  add_common(inspect);
  inspect->add_option("--corpus", a.corpus, "corpus directory");

  try {
    app.parse(argc, argv);
  } catch (const CLI::CallForHelp& e) {
    return app.exit(e);  // help text, exit 0
  } catch (const CLI::ParseError& e) {
    std::cerr << e.what() << "\n" << app.help() << "\n";
    return 2;
  }

  try {
    if (gen->parsed()) return cmd_generate(a);
    if (train->parsed()) return cmd_train(a);
    if (eval->parsed()) return cmd_eval(a);
    if (infer->parsed()) return cmd_infer(a);
    if (inspect->parsed()) return cmd_inspect(a);
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 1;
  }
  return 0;
}
