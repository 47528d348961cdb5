// kbqa: command-line front end for ingesting a KB, linking, training,
// answering and evaluation.

#include <fstream>
#include <iostream>
#include <map>
#include <string>
#include <vector>

#include <CLI11.hpp>
#include <fmt/format.h>
#include <fmt/ostream.h>
#include <spdlog/spdlog.h>

#include "kbqa/entity_linker.hpp"
#include "kbqa/eval.hpp"
#include "kbqa/kb_store.hpp"
#include "kbqa/matchers.hpp"
#include "kbqa/pipeline.hpp"
#include "kbqa/question_io.hpp"
#include "kbqa/synthetic.hpp"
#include "kbqa/text.hpp"

namespace {

using namespace kbqa;

struct KbPaths {
  std::string triples;
  std::string names;
};

struct LoadedKb {
  KnowledgeBase kb;
  NameIndex index;
};

std::ifstream open_input(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw std::runtime_error(fmt::format("cannot open {}", path));
  return in;
}

std::ofstream open_output(const std::string& path) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw std::runtime_error(fmt::format("cannot write {}", path));
  return out;
}

LoadedKb load_kb(const KbPaths& paths) {
  auto triples = open_input(paths.triples);
  auto names = open_input(paths.names);
  std::vector<IngestError> errors;
  auto kb = KnowledgeBase::ingest(triples, names, &errors);
  for (const auto& e : errors) {
    spdlog::warn("{}:{}: {}", e.source, e.line, e.message);
  }
  auto index = NameIndex::build(kb);
  return {std::move(kb), std::move(index)};
}

std::vector<QuestionRecord> load_questions(const std::string& path) {
  auto in = open_input(path);
  std::vector<IngestError> errors;
  auto out = read_questions(in, &errors, path);
  for (const auto& e : errors) spdlog::warn("{}:{}: {}", e.source, e.line, e.message);
  return out;
}

void add_kb_options(CLI::App* cmd, KbPaths& paths) {
  cmd->add_option("--triples", paths.triples, "Triples TSV")->required();
  cmd->add_option("--names", paths.names, "Entity names TSV")->required();
}

struct LinkOptions {
  LinkerConfig cfg;
  std::string mode = "passive";
};

void add_link_options(CLI::App* cmd, LinkOptions& o) {
  cmd->add_option("--alpha", o.cfg.alpha, "Weight of the question coverage factor");
  cmd->add_option("--beta", o.cfg.beta, "Weight of the entity coverage factor");
  cmd->add_option("--top-n", o.cfg.top_n, "Candidates kept per question");
  cmd->add_option("--max-posting", o.cfg.max_posting_len,
                  "Skip question words with longer posting lists (0 = off)");
  cmd->add_option("--mode", o.mode, "passive or active")
      ->check(CLI::IsMember({"passive", "active"}));
}

LinkMode link_mode(const LinkOptions& o) { return *parse_link_mode(o.mode); }

void print_report(const EvalReport& r) {
  fmt::print("{}\n{}\n", to_text(r), to_key_values(r));
}

std::map<std::string, std::string> linker_echo(const LinkOptions& o) {
  return {{"alpha", fmt::format("{}", o.cfg.alpha)},
          {"beta", fmt::format("{}", o.cfg.beta)},
          {"mode", o.mode}};
}

void print_answer(const QaExample& q, const std::optional<ScoredFact>& a,
                  const KnowledgeBase& kb) {
  if (!a) {
    fmt::print("{}\t(no answer)\n", q.question.text);
    return;
  }
  const auto& f = kb.fact(a->fact);
  fmt::print("{}\t{} ({})\t{}\ts_t={:.4f} m_e={:.4f} m_r={:.4f} s_e={:.4f}\n",
             q.question.text, kb.entity(f.subject).id, kb.entity(f.subject).name,
             kb.predicate(f.predicate).id, a->s_t, a->m_e, a->m_r, a->s_e);
}

std::vector<std::size_t> parse_list(const std::string& s) {
  std::vector<std::size_t> out;
  std::size_t pos = 0;
  while (pos < s.size()) {
    const auto comma = s.find(',', pos);
    out.push_back(std::stoul(s.substr(pos, comma - pos)));
    if (comma == std::string::npos) break;
    pos = comma + 1;
  }
  return out;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Single-relation question answering over a triple store"};
  app.require_subcommand(1);
  bool verbose = false;
  app.add_flag("-v,--verbose", verbose, "Debug logging");

  KbPaths kb_paths;
  LinkOptions link;
  std::string questions_path;
  std::string output_path;
  std::string model_path;
  std::string linking_path;
  std::uint64_t seed = 1;

  // ingest
  auto* ingest = app.add_subcommand("ingest", "Load a KB and report statistics");
  add_kb_options(ingest, kb_paths);

  // link
  std::size_t limit = 0;
  auto* link_cmd = app.add_subcommand("link", "Print entity candidates for questions");
  add_kb_options(link_cmd, kb_paths);
  add_link_options(link_cmd, link);
  link_cmd->add_option("--questions", questions_path, "Questions TSV")->required();
  link_cmd->add_option("--limit", limit, "Only the first N questions (0 = all)");

  // tune-linker
  TuneOptions tune;
  std::string ablation = "none";
  auto* tune_cmd = app.add_subcommand("tune-linker", "Grid search for alpha and beta");
  add_kb_options(tune_cmd, kb_paths);
  add_link_options(tune_cmd, link);
  tune_cmd->add_option("--questions", questions_path, "Dev questions TSV")->required();
  tune_cmd->add_option("--grid-step", tune.grid_step, "Lattice step");
  tune_cmd->add_option("--ablation", ablation, "none, -a, -b or -c");

  // train
  TrainConfig train_cfg;
  std::string train_path;
  std::string dev_path;
  std::string pooling = "amp";
  auto* train_cmd = app.add_subcommand("train", "Train the matchers");
  add_kb_options(train_cmd, kb_paths);
  add_link_options(train_cmd, link);
  train_cmd->add_option("--train", train_path, "Training questions TSV")->required();
  train_cmd->add_option("--dev", dev_path, "Dev questions TSV for model selection");
  train_cmd->add_option("--model", model_path, "Output checkpoint")->required();
  train_cmd->add_option("--epochs", train_cfg.epochs, "Epochs");
  train_cmd->add_option("--negatives", train_cfg.negatives, "Negatives per gold fact");
  train_cmd->add_option("--margin", train_cfg.margin, "Hinge margin");
  train_cmd->add_option("--lr", train_cfg.optimizer.learning_rate, "Adagrad learning rate");
  train_cmd->add_option("--l2", train_cfg.optimizer.l2_weight, "L2 weight");
  train_cmd->add_option("--div", train_cfg.optimizer.diversity_weight, "Diversity weight");
  train_cmd->add_option("--d-word", train_cfg.dims.d_word, "Word embedding and filter size");
  train_cmd->add_option("--d-char", train_cfg.dims.d_char, "Char embedding and filter size");
  train_cmd->add_option("--word-width", train_cfg.dims.word_width, "Word filter width");
  train_cmd->add_option("--char-width", train_cfg.dims.char_width, "Char filter width");
  train_cmd->add_option("--pooling", pooling, "tmp, amp, owa-abcnn, owa-habcnn, owa-apcnn");
  train_cmd->add_option("--top-k", train_cfg.pooling.top_k, "OWA-HABCNN top-k");
  train_cmd->add_option("--dev-limit", train_cfg.dev_limit, "Dev questions used per epoch");
  train_cmd->add_option("--seed", seed, "Random seed");

  // answer
  std::string question_text;
  auto* answer_cmd = app.add_subcommand(
      "answer", "Answer one question, a questions file, or read questions from stdin");
  add_kb_options(answer_cmd, kb_paths);
  add_link_options(answer_cmd, link);
  answer_cmd->add_option("--model", model_path, "Checkpoint")->required();
  answer_cmd->add_option("-q,--question", question_text, "Question text");
  answer_cmd->add_option("--questions", questions_path, "Questions TSV");
  answer_cmd->add_option("--predictions", output_path, "Predictions TSV output");
  answer_cmd->add_option("--linking", linking_path, "Precomputed linking results");

  // eval-linking
  std::string n_values = "1,5,10,20,50,100";
  auto* eval_link = app.add_subcommand("eval-linking", "Coverage of the gold subject at N");
  add_kb_options(eval_link, kb_paths);
  add_link_options(eval_link, link);
  eval_link->add_option("--questions", questions_path, "Questions TSV")->required();
  eval_link->add_option("--n", n_values, "Comma-separated cutoffs");
  eval_link->add_option("--linking", linking_path, "Precomputed linking results");

  // eval-qa
  auto* eval_qa = app.add_subcommand("eval-qa", "Accuracy of a predictions file");
  eval_qa->add_option("--questions", questions_path, "Questions TSV")->required();
  eval_qa->add_option("--predictions", output_path, "Predictions TSV")->required();

  // build-rc
  auto* build_rc = app.add_subcommand("build-rc", "Relation classification examples");
  add_kb_options(build_rc, kb_paths);
  build_rc->add_option("--questions", questions_path, "Questions TSV")->required();
  build_rc->add_option("--out", output_path, "RC examples output")->required();

  // eval-rc
  std::string rc_train;
  std::string rc_dev;
  std::string rc_test;
  RcTrainConfig rc_cfg;
  ModelDims rc_dims;
  auto* eval_rc = app.add_subcommand(
      "eval-rc", "Train the predicate matcher on RC examples and report accuracy");
  add_kb_options(eval_rc, kb_paths);
  eval_rc->add_option("--train", rc_train, "RC training examples")->required();
  eval_rc->add_option("--dev", rc_dev, "RC dev examples");
  eval_rc->add_option("--test", rc_test, "RC test examples")->required();
  eval_rc->add_option("--pooling", pooling, "Pooling mode");
  eval_rc->add_option("--top-k", train_cfg.pooling.top_k, "OWA-HABCNN top-k");
  eval_rc->add_option("--epochs", rc_cfg.epochs, "Epochs");
  eval_rc->add_option("--margin", rc_cfg.margin, "Hinge margin");
  eval_rc->add_option("--lr", rc_cfg.optimizer.learning_rate, "Adagrad learning rate");
  eval_rc->add_option("--l2", rc_cfg.optimizer.l2_weight, "L2 weight");
  eval_rc->add_option("--div", rc_cfg.optimizer.diversity_weight, "Diversity weight");
  eval_rc->add_option("--d-word", rc_dims.d_word, "Word embedding size");
  eval_rc->add_option("--seed", seed, "Random seed");
  eval_rc->add_option("--model", model_path, "Save the selected model here");

  // gen-synthetic
  SyntheticSpec synth;
  auto* gen = app.add_subcommand("gen-synthetic", "Write a synthetic KB and question splits");
  gen->add_option("--out", output_path, "Output directory")->required();
  gen->add_option("--entities", synth.entities, "Entity count");
  gen->add_option("--predicates", synth.predicates, "Predicate count");
  gen->add_option("--templates", synth.templates_per_predicate, "Templates per predicate");
  gen->add_option("--train", synth.train_questions, "Training questions");
  gen->add_option("--dev", synth.dev_questions, "Dev questions");
  gen->add_option("--test", synth.test_questions, "Test questions");
  gen->add_option("--seed", synth.seed, "Random seed");

  // export-linking
  auto* export_cmd = app.add_subcommand("export-linking", "Write linking results");
  add_kb_options(export_cmd, kb_paths);
  add_link_options(export_cmd, link);
  export_cmd->add_option("--questions", questions_path, "Questions TSV")->required();
  export_cmd->add_option("--out", output_path, "Output file")->required();

  CLI11_PARSE(app, argc, argv);
  spdlog::set_level(verbose ? spdlog::level::debug : spdlog::level::info);

  try {
    if (*ingest) {
      const auto loaded = load_kb(kb_paths);
      fmt::print("entities\t{}\npredicates\t{}\nfacts\t{}\nindexed_words\t{}\npostings\t{}\n",
                 loaded.kb.entity_count(), loaded.kb.predicate_count(),
                 loaded.kb.fact_count(), loaded.index.word_count(),
                 loaded.index.posting_count());
    } else if (*link_cmd) {
      const auto loaded = load_kb(kb_paths);
      const auto records = load_questions(questions_path);
      const auto examples = prepare_examples(records, loaded.kb);
      const auto n = limit == 0 ? examples.size() : std::min(limit, examples.size());
      for (std::size_t i = 0; i < n; ++i) {
        const auto cands = link_question(examples[i], loaded.kb, loaded.index,
                                         link.cfg, link_mode(link));
        fmt::print("{}\t{}\n", examples[i].id, examples[i].question.text);
        for (const auto& c : cands) {
          const auto& e = loaded.kb.entity(c.entity);
          fmt::print("  {:.6f}\t{}\t{}\t{}\n", c.score, e.id, e.name,
                     join_tokens(c.pattern));
        }
      }
    } else if (*tune_cmd) {
      const auto loaded = load_kb(kb_paths);
      const auto records = load_questions(questions_path);
      const auto examples = prepare_examples(records, loaded.kb);
      const auto abl = parse_ablation(ablation);
      if (!abl) throw std::invalid_argument("unknown ablation " + ablation);
      tune.ablation = *abl;
      tune.top_n = link.cfg.top_n;
      tune.max_posting_len = link.cfg.max_posting_len;
      std::vector<LinkingExample> dev;
      for (const auto& ex : examples) {
        if (!ex.subject) continue;
        LinkingExample le{ex.question, *ex.subject, std::nullopt};
        if (link_mode(link) == LinkMode::kActive) {
          if (!ex.mention) continue;
          le.mention = ex.mention;
        }
        dev.push_back(std::move(le));
      }
      const auto r = tune_weights(dev, loaded.kb, loaded.index, tune);
      fmt::print("alpha={}\tbeta={}\tablation={}\tgrid_points={}\n", r.alpha, r.beta,
                 to_string(tune.ablation), r.grid_points);
      print_report(EvalReport::make("coverage", r.covered, r.total, tune.top_n,
                                    {{"alpha", fmt::format("{}", r.alpha)},
                                     {"beta", fmt::format("{}", r.beta)},
                                     {"ablation", std::string(to_string(tune.ablation))}}));
    } else if (*train_cmd) {
      const auto loaded = load_kb(kb_paths);
      const auto train_records = load_questions(train_path);
      const auto train_set = prepare_examples(train_records, loaded.kb);
      std::vector<QaExample> dev_set;
      if (!dev_path.empty()) {
        const auto dev_records = load_questions(dev_path);
        dev_set = prepare_examples(dev_records, loaded.kb);
      }
      const auto mode = parse_pooling_mode(pooling);
      if (!mode) throw std::invalid_argument("unknown pooling mode " + pooling);
      train_cfg.pooling.mode = *mode;
      train_cfg.linker = link.cfg;
      train_cfg.link_mode = link_mode(link);
      train_cfg.seed = seed;
      const auto result = train(train_set, dev_set, loaded.kb, loaded.index, train_cfg);
      save_model(model_path, result.model,
                 {{"alpha", fmt::format("{}", link.cfg.alpha)},
                  {"beta", fmt::format("{}", link.cfg.beta)},
                  {"seed", std::to_string(seed)},
                  {"best_epoch", std::to_string(result.best_epoch)}});
      for (std::size_t i = 0; i < result.epoch_losses.size(); ++i) {
        fmt::print("epoch={}\tloss={:.6f}", i + 1, result.epoch_losses[i]);
        if (i < result.dev_accuracy.size()) {
          fmt::print("\tdev_accuracy={:.4f}", result.dev_accuracy[i]);
        }
        fmt::print("\n");
      }
      if (result.diverged) {
        spdlog::error("training diverged; saved the last finite model");
        return 2;
      }
    } else if (*answer_cmd) {
      const auto loaded = load_kb(kb_paths);
      const auto model = load_model(model_path);
      const auto mode = link_mode(link);
      if (!questions_path.empty()) {
        const auto records = load_questions(questions_path);
        const auto examples = prepare_examples(records, loaded.kb);
        std::vector<Prediction> preds;
        if (!linking_path.empty()) {
          auto in = open_input(linking_path);
          std::map<std::string, LinkingRecord> by_id;
          for (auto& r : read_linking_results(in)) by_id.emplace(r.question_id, std::move(r));
          for (const auto& ex : examples) {
            const auto it = by_id.find(ex.id);
            FactPool pool;
            if (it != by_id.end()) {
              pool = build_fact_pool(
                  candidates_from_record(it->second, ex.question, loaded.kb, link.cfg.top_n),
                  loaded.kb);
            }
            const auto scored = score_pool(model.model, ex.question, pool, loaded.kb);
            preds.push_back({ex.id, select_answer(scored, loaded.kb)});
          }
        } else {
          preds = predict(examples, model.model, loaded.kb, loaded.index, link.cfg, mode);
        }
        if (!output_path.empty()) {
          auto out = open_output(output_path);
          write_predictions(out, preds, loaded.kb);
        } else {
          write_predictions(std::cout, preds, loaded.kb);
        }
      } else {
        if (mode == LinkMode::kActive) {
          throw std::invalid_argument(
              "active linking needs gold mentions; use --questions");
        }
        const auto run = [&](const std::string& text) {
          QaExample q;
          q.question = parse_question(text, loaded.kb.lexicon());
          print_answer(q, answer(q, model.model, loaded.kb, loaded.index, link.cfg, mode),
                       loaded.kb);
        };
        if (!question_text.empty()) {
          run(question_text);
        } else {
          std::string line;
          while (std::getline(std::cin, line)) {
            if (!line.empty()) run(line);
          }
        }
      }
    } else if (*eval_link) {
      const auto loaded = load_kb(kb_paths);
      const auto records = load_questions(questions_path);
      const auto examples = prepare_examples(records, loaded.kb);
      std::vector<std::vector<EntityIdx>> lists;
      if (!linking_path.empty()) {
        auto in = open_input(linking_path);
        std::map<std::string, std::vector<EntityIdx>> by_id;
        for (const auto& r : read_linking_results(in)) {
          auto& list = by_id[r.question_id];
          for (const auto& [id, score] : r.entries) {
            if (const auto idx = loaded.kb.find_entity(id)) list.push_back(*idx);
          }
        }
        for (const auto& ex : examples) lists.push_back(by_id[ex.id]);
      } else {
        for (const auto& ex : examples) {
          std::vector<EntityIdx> list;
          for (const auto& c : link_question(ex, loaded.kb, loaded.index, link.cfg,
                                             link_mode(link))) {
            list.push_back(c.entity);
          }
          lists.push_back(std::move(list));
        }
      }
      const auto ns = parse_list(n_values);
      for (auto r : coverage_at_n(examples, lists, ns)) {
        r.config = linker_echo(link);
        print_report(r);
      }
    } else if (*eval_qa) {
      const auto records = load_questions(questions_path);
      auto in = open_input(output_path);
      const auto preds = read_predictions(in);
      print_report(qa_accuracy(records, preds));
    } else if (*build_rc) {
      const auto loaded = load_kb(kb_paths);
      const auto records = load_questions(questions_path);
      const auto examples = prepare_examples(records, loaded.kb);
      RcBuildStats stats;
      const auto rc = build_rc_dataset(examples, loaded.kb, &stats);
      auto out = open_output(output_path);
      write_rc_dataset(out, rc, loaded.kb);
      fmt::print("examples={}\tdropped_single_predicate={}\tunresolved={}\tno_mention={}\n",
                 rc.size(), stats.single_predicate, stats.unresolved, stats.no_mention);
    } else if (*eval_rc) {
      const auto loaded = load_kb(kb_paths);
      const auto read = [&](const std::string& path) {
        if (path.empty()) return std::vector<RcExample>{};
        auto in = open_input(path);
        return read_rc_dataset(in, loaded.kb);
      };
      const auto train_set = read(rc_train);
      const auto dev_set = read(rc_dev);
      const auto test_set = read(rc_test);
      const auto mode = parse_pooling_mode(pooling);
      if (!mode) throw std::invalid_argument("unknown pooling mode " + pooling);
      PoolingConfig pc{*mode, train_cfg.pooling.top_k};
      Vocabulary words;
      words.add(kEntityMarker);
      for (const auto& ex : train_set) {
        for (const auto& t : ex.pattern) words.add(t);
      }
      for (const auto& p : loaded.kb.predicates()) {
        for (const auto& t : p.tokens) words.add(t);
      }
      rc_dims.d_char = 1;
      rc_cfg.seed = seed;
      MatchModel model(std::move(words), Vocabulary{}, rc_dims, pc, seed);
      auto result = train_relation_classifier(std::move(model), train_set, dev_set,
                                              loaded.kb, rc_cfg);
      auto report = rc_accuracy(test_set, result.model, loaded.kb);
      report.config["best_epoch"] = std::to_string(result.best_epoch);
      print_report(report);
      if (!model_path.empty()) save_model(model_path, result.model);
    } else if (*gen) {
      write_synthetic(gen_synthetic(synth), output_path);
      fmt::print("wrote synthetic corpus to {}\n", output_path);
    } else if (*export_cmd) {
      const auto loaded = load_kb(kb_paths);
      const auto records = load_questions(questions_path);
      const auto examples = prepare_examples(records, loaded.kb);
      auto out = open_output(output_path);
      for (const auto& ex : examples) {
        const auto cands = link_question(ex, loaded.kb, loaded.index, link.cfg,
                                         link_mode(link));
        write_linking_line(out, ex.id, cands, loaded.kb);
      }
    }
  } catch (const std::exception& e) {
    spdlog::error("{}", e.what());
    return 1;
  }
  return 0;
}
