#include <benchmark/benchmark.h>

#include <random>
#include <string>
#include <vector>

#include "kbqa/entity_linker.hpp"

namespace {

void BM_LccsWords(benchmark::State& state) {
  const auto len = static_cast<std::size_t>(state.range(0));
  std::mt19937_64 rng(1);
  std::uniform_int_distribution<kbqa::WordId> word(0, 29);
  std::vector<kbqa::WordId> q(len);
  std::vector<kbqa::WordId> e(len);
  for (auto& w : q) w = word(rng);
  for (auto& w : e) w = word(rng);
  for (auto _ : state) {
    benchmark::DoNotOptimize(kbqa::lccs_words(q, e));
  }
}
BENCHMARK(BM_LccsWords)->Arg(4)->Arg(15)->Arg(64);

void BM_LccsChars(benchmark::State& state) {
  const auto len = static_cast<std::size_t>(state.range(0));
  std::mt19937_64 rng(2);
  std::uniform_int_distribution<int> ch('a', 'z');
  std::string q(len, ' ');
  std::string e(len, ' ');
  for (auto& c : q) c = static_cast<char>(ch(rng));
  for (auto& c : e) c = static_cast<char>(ch(rng));
  for (auto _ : state) {
    benchmark::DoNotOptimize(kbqa::lccs_chars(q, e));
  }
}
BENCHMARK(BM_LccsChars)->Arg(16)->Arg(64)->Arg(256);

}  // namespace
