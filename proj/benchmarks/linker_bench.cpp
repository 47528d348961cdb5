#include <benchmark/benchmark.h>

#include <map>
#include <sstream>

#include "kbqa/entity_linker.hpp"
#include "kbqa/synthetic.hpp"

namespace {

struct Fixture {
  kbqa::KnowledgeBase kb;
  kbqa::NameIndex index;
  std::vector<kbqa::ParsedQuestion> questions;
};

const Fixture& fixture(std::size_t entities) {
  static std::map<std::size_t, Fixture> cache;
  auto it = cache.find(entities);
  if (it != cache.end()) return it->second;
  kbqa::SyntheticSpec spec;
  spec.entities = entities;
  spec.train_questions = 1;
  spec.dev_questions = 1;
  spec.test_questions = 200;
  const auto corpus = kbqa::gen_synthetic(spec);
  std::stringstream triples;
  std::stringstream names;
  for (const auto& t : corpus.triples) triples << t.subject << '\t' << t.predicate << '\t' << t.object << '\n';
  for (const auto& [id, name] : corpus.names) names << id << '\t' << name << '\n';
  Fixture f{kbqa::KnowledgeBase::ingest(triples, names), {}, {}};
  f.index = kbqa::NameIndex::build(f.kb);
  for (const auto& q : corpus.test) f.questions.push_back(kbqa::parse_question(q.text, f.kb.lexicon()));
  return cache.emplace(entities, std::move(f)).first->second;
}

void BM_LinkPassive(benchmark::State& state) {
  const auto& f = fixture(static_cast<std::size_t>(state.range(0)));
  const kbqa::LinkerConfig cfg;
  std::size_t i = 0;
  for (auto _ : state) {
    benchmark::DoNotOptimize(kbqa::link_passive(f.questions[i], f.index, f.kb, cfg));
    i = (i + 1) % f.questions.size();
  }
  state.SetItemsProcessed(state.iterations());
}
BENCHMARK(BM_LinkPassive)->Arg(100)->Arg(1000)->Arg(10000);

void BM_BuildIndex(benchmark::State& state) {
  const auto& f = fixture(static_cast<std::size_t>(state.range(0)));
  for (auto _ : state) {
    benchmark::DoNotOptimize(kbqa::NameIndex::build(f.kb));
  }
}
BENCHMARK(BM_BuildIndex)->Arg(1000)->Arg(10000);

}  // namespace
