#include <benchmark/benchmark.h>

#include <random>

#include "csk/channel.hpp"
#include "csk/colorspace.hpp"
#include "csk/harness.hpp"
#include "csk/neural.hpp"

using namespace csk;

namespace {

void BM_LedChromaticity(benchmark::State& state) {
  const CmfTable& cmf = default_cmf();
  for (auto _ : state) benchmark::DoNotOptimize(led_chromaticity(kRedCenterNm, kLedFwhmNm, cmf));
}
BENCHMARK(BM_LedChromaticity);

void BM_Propagate(benchmark::State& state) {
  Scenario s = reference_scenario();
  s.order = static_cast<int>(state.range(0));
  const Constellation c = s.constellation();
  const BitVector bits = random_bits(320, 1);
  const Packet pkt = frame_packet(bits_to_symbols(bits, c).symbols, s.layout, c);
  const PowerWaveform w = packet_to_waveform(pkt, s.baud_hz, s.efficiency);
  for (auto _ : state) benchmark::DoNotOptimize(propagate(w, s.channel));
  state.SetItemsProcessed(state.iterations() * static_cast<std::int64_t>(pkt.slots.size()));
}
BENCHMARK(BM_Propagate)->Arg(4)->Arg(16);

// Sync, segmentation, calibration and LS decoding of one 320-bit packet.
void BM_ReceiveLs(benchmark::State& state) {
  Scenario s = reference_scenario();
  s.order = static_cast<int>(state.range(0));
  const SimulatedPacket p = simulate_packet(s, random_bits(320, 2), 3);
  for (auto _ : state) {
    const RxFrame f = receive(p.trace, s, p.stream.symbols.size());
    benchmark::DoNotOptimize(decode_ls(f, s));
  }
  state.SetItemsProcessed(state.iterations() * static_cast<std::int64_t>(p.stream.symbols.size()));
}
BENCHMARK(BM_ReceiveLs)->Arg(4)->Arg(16);

nn::Dataset random_sequences(std::size_t n, int t_len, int dim) {
  std::mt19937_64 rng(4);
  std::normal_distribution<double> g(0.0, 1.0);
  nn::Dataset d;
  for (std::size_t k = 0; k < n; ++k) {
    nn::LabeledSequence s;
    s.x.resize(t_len, dim);
    for (Eigen::Index i = 0; i < s.x.size(); ++i) s.x.data()[i] = g(rng);
    s.label = static_cast<int>(k % 4);
    d.push_back(std::move(s));
  }
  return d;
}

// One training step on a 32-sequence batch of anchor features (7 cells x 4 anchors).
void BM_BiLstmStep(benchmark::State& state) {
  const int hidden = static_cast<int>(state.range(0));
  const nn::BiLstmModel m = nn::BiLstmModel::initialized(2, hidden, 28, 4, 0.2, 1);
  const nn::SequenceBatch b = nn::make_batch(random_sequences(32, 4, 28));
  std::mt19937_64 rng(5);
  for (auto _ : state) {
    const nn::DropoutMasks masks = nn::sample_masks(m, b.length(), b.batch_size(), rng);
    benchmark::DoNotOptimize(nn::backward(m, nn::bilstm_forward(m, b, true, &masks), b));
  }
  state.SetItemsProcessed(state.iterations() * 32);
}
BENCHMARK(BM_BiLstmStep)->Arg(16)->Arg(64);

void BM_BiLstmInference(benchmark::State& state) {
  const nn::BiLstmModel m = nn::BiLstmModel::initialized(2, 64, 28, 4, 0.2, 1);
  const nn::SequenceBatch b = nn::make_batch(random_sequences(160, 4, 28));
  for (auto _ : state) benchmark::DoNotOptimize(nn::predict(m, b));
  state.SetItemsProcessed(state.iterations() * 160);
}
BENCHMARK(BM_BiLstmInference);

}  // namespace

BENCHMARK_MAIN();
