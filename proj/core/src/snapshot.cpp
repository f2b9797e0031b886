#include "mtlb/snapshot.hpp"

#include <bit>
#include <cstring>
#include <fstream>

#include "mtlb/errors.hpp"

namespace mtlb {

namespace {

constexpr char kMagic[8] = {'M', 'T', 'L', 'B', 'S', 'N', 'A', 'P'};

void put_u32(std::string& out, uint32_t v) {
    for (int i = 0; i < 4; ++i) out.push_back(static_cast<char>((v >> (8 * i)) & 0xff));
}

void put_u64(std::string& out, uint64_t v) {
    for (int i = 0; i < 8; ++i) out.push_back(static_cast<char>((v >> (8 * i)) & 0xff));
}

void put_i64(std::string& out, int64_t v) { put_u64(out, static_cast<uint64_t>(v)); }

void put_f64(std::string& out, double v) { put_u64(out, std::bit_cast<uint64_t>(v)); }

void put_str(std::string& out, const std::string& s) {
    put_u64(out, s.size());
    out.append(s);
}

void put_f64s(std::string& out, const std::vector<double>& vs) {
    put_u64(out, vs.size());
    for (double v : vs) put_f64(out, v);
}

struct Reader {
    const std::string& buf;
    size_t pos = 0;

    void need(size_t n) const {
        if (pos + n > buf.size()) throw SnapshotError("snapshot file truncated");
    }
    uint32_t u32() {
        need(4);
        uint32_t v = 0;
        for (int i = 0; i < 4; ++i)
            v |= static_cast<uint32_t>(static_cast<unsigned char>(buf[pos + i])) << (8 * i);
        pos += 4;
        return v;
    }
    uint64_t u64() {
        need(8);
        uint64_t v = 0;
        for (int i = 0; i < 8; ++i)
            v |= static_cast<uint64_t>(static_cast<unsigned char>(buf[pos + i])) << (8 * i);
        pos += 8;
        return v;
    }
    int64_t i64() { return static_cast<int64_t>(u64()); }
    double f64() { return std::bit_cast<double>(u64()); }
    std::string str() {
        const uint64_t n = u64();
        need(n);
        std::string s = buf.substr(pos, n);
        pos += n;
        return s;
    }
    std::vector<double> f64s() {
        const uint64_t n = u64();
        std::vector<double> vs(n);
        for (uint64_t i = 0; i < n; ++i) vs[i] = f64();
        return vs;
    }
};

}  // namespace

ModelSnapshot snapshot_state(const MtlModel& model, const AdamState& adam, int64_t epoch,
                             uint64_t seed, const std::string& rng_state) {
    ModelSnapshot snap;
    snap.arch = arch_hash(model.arch());
    snap.epoch = epoch;
    snap.seed = seed;
    snap.rng_state = rng_state;

    for (const auto& [name, entry] : model.params()) {
        ModelSnapshot::ParamBlock b;
        b.name = name;
        b.partition = partition_name(entry.partition);
        b.shape = entry.tensor.shape();
        auto vals = entry.tensor.values();
        b.values.assign(vals.begin(), vals.end());
        snap.params.push_back(std::move(b));
    }

    snap.adam_config = adam.config();
    snap.adam_step = adam.step();
    for (const auto& [name, mom] : adam.moments())
        snap.moments.push_back({name, mom.m, mom.v});
    return snap;
}

void restore_full(MtlModel& model, AdamState& adam, const ModelSnapshot& snap) {
    if (snap.arch != arch_hash(model.arch()))
        throw SnapshotError("snapshot was produced by a different architecture");
    ParamSet& params = model.params();
    if (snap.params.size() != params.size())
        throw SnapshotError("snapshot parameter set does not match the model");
    for (const auto& b : snap.params) {
        if (!params.contains(b.name))
            throw SnapshotError("snapshot has unknown parameter " + b.name);
        Tensor& t = params.at(b.name);
        if (t.shape() != b.shape)
            throw SnapshotError("snapshot shape mismatch for " + b.name);
        if (partition_from_name(b.partition) != params.partition_of(b.name))
            throw SnapshotError("snapshot partition mismatch for " + b.name);
        auto dst = t.mutable_values();
        std::copy(b.values.begin(), b.values.end(), dst.begin());
        t.clear_grad();
    }

    const AdamConfig& c = adam.config();
    const AdamConfig& sc = snap.adam_config;
    if (c.lr != sc.lr || c.beta1 != sc.beta1 || c.beta2 != sc.beta2 || c.eps != sc.eps)
        throw SnapshotError("snapshot optimizer config differs from the active one");
    adam.reset();
    adam.set_step(snap.adam_step);
    for (const auto& b : snap.moments) {
        if (!params.contains(b.name))
            throw SnapshotError("snapshot has moments for unknown parameter " + b.name);
        adam.set_moments(b.name, {b.m, b.v});
    }
}

void restore_weights(MtlModel& model, const ModelSnapshot& snap) {
    if (snap.arch != arch_hash(model.arch()))
        throw SnapshotError("snapshot was produced by a different architecture");
    ParamSet& params = model.params();
    for (const auto& b : snap.params) {
        if (partition_from_name(b.partition) == Partition::Weighting) continue;
        if (!params.contains(b.name))
            throw SnapshotError("snapshot has unknown parameter " + b.name);
        Tensor& t = params.at(b.name);
        if (t.shape() != b.shape)
            throw SnapshotError("snapshot shape mismatch for " + b.name);
        auto dst = t.mutable_values();
        std::copy(b.values.begin(), b.values.end(), dst.begin());
        t.clear_grad();
    }
}

void save_snapshot(const ModelSnapshot& snap, const std::string& path) {
    std::string out;
    out.append(kMagic, sizeof(kMagic));
    put_u32(out, snap.version);
    put_u64(out, snap.arch);
    put_i64(out, snap.epoch);
    put_u64(out, snap.seed);
    put_str(out, snap.rng_state);

    put_u64(out, snap.params.size());
    for (const auto& b : snap.params) {
        put_str(out, b.name);
        put_str(out, b.partition);
        put_u64(out, b.shape.size());
        for (int64_t d : b.shape) put_i64(out, d);
        put_f64s(out, b.values);
    }

    put_f64(out, snap.adam_config.lr);
    put_f64(out, snap.adam_config.beta1);
    put_f64(out, snap.adam_config.beta2);
    put_f64(out, snap.adam_config.eps);
    put_i64(out, snap.adam_step);
    put_u64(out, snap.moments.size());
    for (const auto& b : snap.moments) {
        put_str(out, b.name);
        put_f64s(out, b.m);
        put_f64s(out, b.v);
    }

    std::ofstream f(path, std::ios::binary | std::ios::trunc);
    if (!f) throw SnapshotError("cannot open " + path + " for writing");
    f.write(out.data(), static_cast<std::streamsize>(out.size()));
    if (!f) throw SnapshotError("short write to " + path);
}

ModelSnapshot load_snapshot(const std::string& path) {
    std::ifstream f(path, std::ios::binary);
    if (!f) throw SnapshotError("cannot open " + path);
    std::string buf((std::istreambuf_iterator<char>(f)), std::istreambuf_iterator<char>());

    if (buf.size() < sizeof(kMagic) || std::memcmp(buf.data(), kMagic, sizeof(kMagic)) != 0)
        throw SnapshotError(path + " is not a snapshot file");
    Reader r{buf, sizeof(kMagic)};

    ModelSnapshot snap;
    snap.version = r.u32();
    if (snap.version != 1)
        throw SnapshotError("unsupported snapshot version " + std::to_string(snap.version));
    snap.arch = r.u64();
    snap.epoch = r.i64();
    snap.seed = r.u64();
    snap.rng_state = r.str();

    const uint64_t n_params = r.u64();
    for (uint64_t i = 0; i < n_params; ++i) {
        ModelSnapshot::ParamBlock b;
        b.name = r.str();
        b.partition = r.str();
        const uint64_t rank = r.u64();
        for (uint64_t d = 0; d < rank; ++d) b.shape.push_back(r.i64());
        b.values = r.f64s();
        if (static_cast<int64_t>(b.values.size()) != shape_numel(b.shape))
            throw SnapshotError("corrupt value block for " + b.name);
        snap.params.push_back(std::move(b));
    }

    snap.adam_config.lr = r.f64();
    snap.adam_config.beta1 = r.f64();
    snap.adam_config.beta2 = r.f64();
    snap.adam_config.eps = r.f64();
    snap.adam_step = r.i64();
    const uint64_t n_moments = r.u64();
    for (uint64_t i = 0; i < n_moments; ++i) {
        ModelSnapshot::MomentBlock b;
        b.name = r.str();
        b.m = r.f64s();
        b.v = r.f64s();
        snap.moments.push_back(std::move(b));
    }
    if (r.pos != buf.size()) throw SnapshotError(path + " has trailing bytes");
    return snap;
}

}  // namespace mtlb
