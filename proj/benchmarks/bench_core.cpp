// Microbenchmarks for the training hot path: convolution, the full forward
// pass, one optimization step, evaluation, data generation and the search
// loop machinery.

#include <benchmark/benchmark.h>

#include <random>
#include <vector>

#include "mtlb/adam.hpp"
#include "mtlb/evolution.hpp"
#include "mtlb/losses.hpp"
#include "mtlb/metrics.hpp"
#include "mtlb/model.hpp"
#include "mtlb/scene.hpp"
#include "mtlb/search_space.hpp"
#include "mtlb/tensor.hpp"

using namespace mtlb;

namespace {

Tensor random_tensor(Shape shape, uint64_t seed, bool needs_grad = false) {
    std::mt19937_64 rng(seed);
    std::normal_distribution<double> d(0.0, 1.0);
    std::vector<double> vals(static_cast<size_t>(shape_numel(shape)));
    for (double& v : vals) v = d(rng);
    return Tensor::from_values(std::move(shape), std::move(vals), needs_grad);
}

const Dataset& small_dataset() {
    static const Dataset data = [] {
        BenchmarkConfig bc = benchmark_preset("balanced-small").bench;
        bc.seed = 3;
        return generate_dataset(bc);
    }();
    return data;
}

}  // namespace

static void BM_Conv2dForward(benchmark::State& state) {
    const Tensor input = random_tensor({8, 8, 16, 16}, 1);
    const Tensor weight = random_tensor({16, 8, 3, 3}, 2);
    const Tensor bias = random_tensor({16}, 3);
    NoGradGuard guard;
    for (auto _ : state) {
        Tensor out = conv2d(input, weight, bias, 1);
        benchmark::DoNotOptimize(out);
    }
}
BENCHMARK(BM_Conv2dForward);

static void BM_ModelForward(benchmark::State& state) {
    const Dataset& data = small_dataset();
    MtlModel model(ArchConfig{}, 1);
    const std::vector<int64_t> idx(data.train_seg.begin(), data.train_seg.begin() + 8);
    const Tensor input = make_input_batch(data, idx);
    NoGradGuard guard;
    for (auto _ : state) {
        MtlOutputs out = forward_mtl(model, input, input);
        benchmark::DoNotOptimize(out);
    }
}
BENCHMARK(BM_ModelForward);

static void BM_TrainStep(benchmark::State& state) {
    const Dataset& data = small_dataset();
    MtlModel model(ArchConfig{}, 1);
    AdamState adam(AdamConfig{});
    const std::vector<int64_t> seg_idx(data.train_seg.begin(), data.train_seg.begin() + 4);
    const std::vector<int64_t> det_idx(data.train_det.begin(), data.train_det.begin() + 4);
    const Batch batch = make_batch(data, seg_idx, det_idx);
    for (auto _ : state) {
        TaskLosses losses = task_losses(model, batch, data.config);
        Tensor total = add(scale(losses.seg, 0.5), scale(losses.det, 0.5));
        backward(total);
        adam_step(model.params(), adam);
    }
}
BENCHMARK(BM_TrainStep);

static void BM_SegCrossEntropyBackward(benchmark::State& state) {
    Tensor logits = random_tensor({256, 4}, 4, true);
    std::mt19937_64 rng(5);
    std::uniform_int_distribution<int> ld(0, 3);
    std::vector<int> labels(256);
    for (int& l : labels) l = ld(rng);
    for (auto _ : state) {
        logits.clear_grad();
        Tensor loss = softmax_cross_entropy(logits, labels);
        backward(loss);
        benchmark::DoNotOptimize(loss);
    }
}
BENCHMARK(BM_SegCrossEntropyBackward);

static void BM_EvaluateModel(benchmark::State& state) {
    const Dataset& data = small_dataset();
    MtlModel model(ArchConfig{}, 1);
    for (auto _ : state) {
        MetricReport report = evaluate_model(model, data, data.val);
        benchmark::DoNotOptimize(report);
    }
}
BENCHMARK(BM_EvaluateModel);

static void BM_GenerateDataset(benchmark::State& state) {
    BenchmarkConfig bc = benchmark_preset("balanced-small").bench;
    bc.seed = 3;
    for (auto _ : state) {
        Dataset data = generate_dataset(bc);
        benchmark::DoNotOptimize(data);
    }
}
BENCHMARK(BM_GenerateDataset);

static void BM_SearchLoop(benchmark::State& state) {
    const SearchSpace space = weights_space();
    EsConfig es;
    es.max_evals = 100;
    es.seed = 12;
    es.warm_start = false;
    const std::vector<double> target{0.6, 0.4};
    const Evaluator eval = [&](const Candidate& c, bool) {
        EvalOutcome o;
        const double d0 = c.point[0] - target[0];
        const double d1 = c.point[1] - target[1];
        o.fitness = -(d0 * d0 + d1 * d1);
        return o;
    };
    for (auto _ : state) {
        SearchResult res = run_search(space, es, eval);
        benchmark::DoNotOptimize(res);
    }
}
BENCHMARK(BM_SearchLoop);

BENCHMARK_MAIN();
