#include <benchmark/benchmark.h>

#include <string>
#include <vector>

#include "kbqa/matchers.hpp"

namespace {

kbqa::MatchModel make_model(kbqa::PoolingMode mode, std::size_t d) {
  kbqa::Vocabulary words;
  for (const auto* w : {"where", "was", "born", "people", "person", "place", "of", "birth"}) {
    words.add(w);
  }
  kbqa::Vocabulary chars;
  for (const char c : std::string("abcdefghijklmnopqrstuvwxyz ")) chars.add(std::string_view(&c, 1));
  return kbqa::MatchModel(std::move(words), std::move(chars), kbqa::ModelDims{d, d / 2, 3, 3},
                          kbqa::PoolingConfig{mode, 3}, 1);
}

void BM_WordMatch(benchmark::State& state) {
  const auto mode = static_cast<kbqa::PoolingMode>(state.range(0));
  const auto model = make_model(mode, static_cast<std::size_t>(state.range(1)));
  const std::vector<std::string> pred{"people", "person", "place", "of", "birth"};
  const std::vector<std::string> pattern{"where", "was", "<e>", "born"};
  for (auto _ : state) {
    benchmark::DoNotOptimize(kbqa::word_match(model, pred, pattern, model.pooling()));
  }
  state.SetLabel(std::string(kbqa::to_string(mode)));
}
BENCHMARK(BM_WordMatch)
    ->ArgsProduct({{static_cast<long>(kbqa::PoolingMode::kTmp),
                    static_cast<long>(kbqa::PoolingMode::kAmp),
                    static_cast<long>(kbqa::PoolingMode::kOwaAbcnn),
                    static_cast<long>(kbqa::PoolingMode::kOwaHabcnn),
                    static_cast<long>(kbqa::PoolingMode::kOwaApcnn)},
                   {64, 500}});

void BM_CharMatch(benchmark::State& state) {
  const auto model = make_model(kbqa::PoolingMode::kAmp, static_cast<std::size_t>(state.range(0)));
  for (auto _ : state) {
    benchmark::DoNotOptimize(kbqa::char_match(model, "barack hussein obama", "barack obama"));
  }
}
BENCHMARK(BM_CharMatch)->Arg(64)->Arg(200);

}  // namespace
