#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "mtlb/adam.hpp"
#include "mtlb/model.hpp"

namespace mtlb {

/// Serializable training state: every named parameter with its partition,
/// optimizer moments, and the bookkeeping needed to resume a run mid-stream.
struct ModelSnapshot {
    uint32_t version = 1;
    uint64_t arch = 0;       // arch_hash of the producing model
    int64_t epoch = 0;       // completed epochs
    uint64_t seed = 0;
    std::string rng_state;   // serialized data-order engine

    struct ParamBlock {
        std::string name;
        std::string partition;
        Shape shape;
        std::vector<double> values;
    };
    std::vector<ParamBlock> params;  // name-sorted

    AdamConfig adam_config;
    int64_t adam_step = 0;
    struct MomentBlock {
        std::string name;
        std::vector<double> m;
        std::vector<double> v;
    };
    std::vector<MomentBlock> moments;  // name-sorted
};

ModelSnapshot snapshot_state(const MtlModel& model, const AdamState& adam, int64_t epoch,
                             uint64_t seed, const std::string& rng_state);

/// Exact continuation: parameter names must match one-to-one, the optimizer
/// config must be identical, and moments plus step counter are restored.
void restore_full(MtlModel& model, AdamState& adam, const ModelSnapshot& snap);

/// Soft transfer of the network only (shared trunk and both heads); any
/// weighting-partition blocks in the snapshot are ignored and the optimizer
/// is not touched.
void restore_weights(MtlModel& model, const ModelSnapshot& snap);

/// Little-endian binary file, stable across platforms; identical state
/// serializes to identical bytes.
void save_snapshot(const ModelSnapshot& snap, const std::string& path);
ModelSnapshot load_snapshot(const std::string& path);

}  // namespace mtlb
