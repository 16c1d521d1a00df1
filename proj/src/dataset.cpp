#include "gicnet/dataset.hpp"

#include <cmath>
#include <fstream>
#include <numeric>
#include <random>
#include <sstream>

#include "gicnet/error.hpp"

namespace gicnet {

namespace {

constexpr int kManifestVersion = 1;

std::uint64_t splitmix64(std::uint64_t x) {
    x += 0x9e3779b97f4a7c15ULL;
    x = (x ^ (x >> 30)) * 0xbf58476d1ce4e5b9ULL;
    x = (x ^ (x >> 27)) * 0x94d049bb133111ebULL;
    return x ^ (x >> 31);
}

double unit(std::mt19937_64& rng) { return static_cast<double>(rng() >> 11) * 0x1.0p-53; }

void shuffle(std::vector<std::size_t>& v, std::uint64_t seed) {
    std::mt19937_64 rng(seed);
    for (std::size_t k = v.size(); k > 1; --k) std::swap(v[k - 1], v[rng() % k]);
}

Split split_from_string(const std::string& s) {
    if (s == "train") return Split::train;
    if (s == "val") return Split::val;
    if (s == "test") return Split::test;
    throw ParseError("unknown split '" + s + "'");
}

std::string sample_file(int id) {
    char buf[32];
    std::snprintf(buf, sizeof buf, "samples/%05d.json", id);
    return buf;
}

}  // namespace

std::vector<GmdScenario> generate(const NetworkModel& network, std::span<const double> directions,
                                  std::span<const double> magnitudes, int samples_per_cell, std::uint64_t seed,
                                  const GenerateOptions& options) {
    if (samples_per_cell < 1) throw InvalidArgument("samples_per_cell must be >= 1");
    std::vector<GmdScenario> out;
    int id = 0;
    for (double dir : directions) {
        for (double mag : magnitudes) {
            for (int s = 0; s < samples_per_cell; ++s) {
                GmdScenario sc;
                sc.id = id;
                sc.seed = splitmix64(seed ^ splitmix64(static_cast<std::uint64_t>(id)));
                sc.field = EField(mag, dir);
                std::mt19937_64 rng(sc.seed);
                const double span = options.scale_hi - options.scale_lo;
                for (std::size_t k = 0; k < network.loads.size(); ++k) {
                    sc.load_scale_p.push_back(options.scale_lo + span * unit(rng));
                }
                if (options.independent_pq) {
                    for (std::size_t k = 0; k < network.loads.size(); ++k) {
                        sc.load_scale_q.push_back(options.scale_lo + span * unit(rng));
                    }
                } else {
                    sc.load_scale_q = sc.load_scale_p;
                }
                out.push_back(std::move(sc));
                ++id;
            }
        }
    }
    return out;
}

std::string to_string(Split s) {
    switch (s) {
        case Split::train: return "train";
        case Split::val: return "val";
        case Split::test: return "test";
    }
    return "train";
}

std::vector<std::size_t> DatasetManifest::indices(Split s) const {
    std::vector<std::size_t> out;
    for (std::size_t i = 0; i < samples.size(); ++i) {
        if (samples[i].split == s) out.push_back(i);
    }
    return out;
}

nlohmann::json manifest_to_json(const DatasetManifest& m) {
    using nlohmann::json;
    json costs = json::array();
    for (const auto& c : m.costs) costs.push_back({{"candidate", c.candidate}, {"cost", c.cost}});
    json samples = json::array();
    for (const auto& s : m.samples) {
        samples.push_back({{"scenario_id", s.scenario_id},
                           {"file", s.file},
                           {"split", to_string(s.split)},
                           {"blocked", s.blocked},
                           {"cost", s.cost},
                           {"shed_cost", s.shed_cost},
                           {"evaluations", s.evaluations}});
    }
    json split_sizes;
    for (Split s : {Split::train, Split::val, Split::test}) split_sizes[to_string(s)] = m.indices(s).size();
    return {{"format", "gicnet-dataset"},
            {"version", m.version},
            {"network", m.network},
            {"network_file", "network.json"},
            {"schema_hash", m.schema_hash},
            {"seed", m.seed},
            {"budget", m.budget},
            {"costs", std::move(costs)},
            {"label_method", m.method},
            {"split", {{"train", m.split.train}, {"val", m.split.val}, {"test", m.split.test}}},
            {"split_sizes", std::move(split_sizes)},
            {"norm_file", m.norm_file},
            {"timing_file", "timing.json"},
            {"samples", std::move(samples)}};
}

DatasetManifest manifest_from_json(const nlohmann::json& j) {
    try {
        DatasetManifest m;
        m.version = j.at("version").get<int>();
        if (m.version != kManifestVersion) throw ParseError("unsupported dataset version");
        m.network = j.at("network").get<std::string>();
        m.schema_hash = j.at("schema_hash").get<std::uint64_t>();
        m.seed = j.at("seed").get<std::uint64_t>();
        m.budget = j.at("budget").get<double>();
        for (const auto& c : j.at("costs")) m.costs.push_back({c.at("candidate").get<int>(), c.at("cost").get<double>()});
        m.method = j.at("label_method").get<std::string>();
        const auto& sp = j.at("split");
        m.split = {sp.at("train").get<double>(), sp.at("val").get<double>(), sp.at("test").get<double>()};
        m.norm_file = j.value("norm_file", std::string());
        for (const auto& s : j.at("samples")) {
            SampleRecord r;
            r.scenario_id = s.at("scenario_id").get<int>();
            r.file = s.at("file").get<std::string>();
            r.split = split_from_string(s.at("split").get<std::string>());
            r.blocked = s.at("blocked").get<std::vector<int>>();
            r.cost = s.at("cost").get<double>();
            r.shed_cost = s.at("shed_cost").get<double>();
            r.evaluations = s.at("evaluations").get<int>();
            m.samples.push_back(std::move(r));
        }
        return m;
    } catch (const nlohmann::json::exception& e) {
        throw ParseError(std::string("malformed manifest: ") + e.what());
    }
}

std::vector<TrainSample> Dataset::samples(std::span<const std::size_t> indices) const {
    std::vector<TrainSample> out;
    out.reserve(indices.size());
    for (std::size_t i : indices) out.push_back({&network, scenarios.at(i), graphs.at(i)});
    return out;
}

std::vector<Split> assign_splits(std::size_t n, const SplitSpec& split, std::uint64_t seed) {
    if (split.train < 0.0 || split.val < 0.0 || split.test < 0.0 ||
        std::abs(split.train + split.val + split.test - 1.0) > 1e-9) {
        throw InvalidArgument("split fractions must be non-negative and sum to 1");
    }
    const auto n_train = static_cast<std::size_t>(std::llround(static_cast<double>(n) * split.train));
    const auto n_val = std::min(n - std::min(n, n_train),
                                static_cast<std::size_t>(std::llround(static_cast<double>(n) * split.val)));
    std::vector<std::size_t> order(n);
    std::iota(order.begin(), order.end(), 0);
    shuffle(order, splitmix64(seed ^ 0x5eedULL));
    std::vector<Split> out(n, Split::test);
    for (std::size_t k = 0; k < n; ++k) {
        if (k < n_train) {
            out[order[k]] = Split::train;
        } else if (k < n_train + n_val) {
            out[order[k]] = Split::val;
        }
    }
    return out;
}

Dataset build_dataset(const NetworkModel& network, std::span<const GmdScenario> scenarios, double budget,
                      const SplitSpec& split, std::uint64_t seed, const std::optional<std::filesystem::path>& out_dir,
                      const PlacementOptions& options) {
    const auto splits = assign_splits(scenarios.size(), split, seed);
    const auto labels = label_scenarios(network, scenarios, budget, options);

    Dataset ds;
    ds.network = network;
    auto& m = ds.manifest;
    m.version = kManifestVersion;
    m.network = network.name;
    m.schema_hash = schema_hash();
    m.seed = seed;
    m.budget = budget;
    for (int c : network.candidates()) m.costs.push_back({c, network.blocker_cost(c)});
    m.split = split;
    m.method = labels.empty() ? "none" : to_string(labels.front().solution.method);

    for (std::size_t i = 0; i < scenarios.size(); ++i) {
        const auto& sol = labels[i].solution;
        const auto z = sol.z.dense(network);
        ds.scenarios.push_back(scenarios[i]);
        ds.graphs.push_back(build_graph(network, scenarios[i], std::span<const double>(z)));
        ds.solver_seconds.push_back(labels[i].seconds);
        SampleRecord r;
        r.scenario_id = scenarios[i].id;
        r.file = sample_file(scenarios[i].id);
        r.split = splits[i];
        r.blocked = sol.blocked;
        r.cost = sol.cost;
        r.shed_cost = sol.shed_cost;
        r.evaluations = sol.evaluations;
        m.samples.push_back(std::move(r));
    }

    std::optional<NormStats> norm;
    {
        std::vector<HeteroGraph> train_graphs;
        for (std::size_t i : m.indices(Split::train)) train_graphs.push_back(ds.graphs[i]);
        if (!train_graphs.empty()) {
            norm = fit_normalization(train_graphs);
            m.norm_file = "norm.json";
        }
    }

    if (out_dir) {
        std::filesystem::create_directories(*out_dir / "samples");
        write_atomic(*out_dir / "network.json", network_to_json(network).dump(1) + "\n");
        for (std::size_t i = 0; i < scenarios.size(); ++i) {
            const nlohmann::json j = {{"scenario", scenario_to_json(ds.scenarios[i])},
                                      {"label", placement_to_json(labels[i].solution)},
                                      {"graph", graph_to_json(ds.graphs[i])}};
            write_atomic(*out_dir / m.samples[i].file, j.dump() + "\n");
        }
        if (norm) write_atomic(*out_dir / "norm.json", norm_stats_to_json(*norm).dump(1) + "\n");
        nlohmann::json timing = nlohmann::json::array();
        for (std::size_t i = 0; i < scenarios.size(); ++i) {
            timing.push_back({{"scenario_id", scenarios[i].id}, {"solver_seconds", ds.solver_seconds[i]}});
        }
        write_atomic(*out_dir / "timing.json", timing.dump(1) + "\n");
        write_atomic(*out_dir / "manifest.json", manifest_to_json(m).dump(1) + "\n");
    }
    return ds;
}

Dataset load_dataset(const std::filesystem::path& dir) {
    Dataset ds;
    ds.manifest = manifest_from_json(read_json(dir / "manifest.json"));
    if (ds.manifest.schema_hash != schema_hash()) throw SchemaError("dataset was built with a different feature schema");
    ds.network = network_from_json(read_json(dir / "network.json"));
    ds.network.index();
    ensure_valid(ds.network);
    for (const auto& r : ds.manifest.samples) {
        const auto j = read_json(dir / r.file);
        try {
            ds.scenarios.push_back(scenario_from_json(j.at("scenario")));
            ds.graphs.push_back(graph_from_json(j.at("graph")));
        } catch (const nlohmann::json::exception& e) {
            throw ParseError(r.file + ": " + e.what());
        }
        if (!ds.graphs.back().labels) throw SchemaError(r.file + " has no labels");
    }
    ds.solver_seconds.assign(ds.manifest.samples.size(), 0.0);
    if (std::filesystem::exists(dir / "timing.json")) {
        const auto t = read_json(dir / "timing.json");
        for (std::size_t i = 0; i < t.size() && i < ds.solver_seconds.size(); ++i) {
            ds.solver_seconds[i] = t[i].at("solver_seconds").get<double>();
        }
    }
    return ds;
}

std::vector<Fold> kfold(std::size_t n, int k, std::uint64_t seed) {
    if (k < 2 || static_cast<std::size_t>(k) > n) {
        throw InvalidArgument("k must satisfy 2 <= k <= " + std::to_string(n) + ", got " + std::to_string(k));
    }
    std::vector<std::size_t> order(n);
    std::iota(order.begin(), order.end(), 0);
    shuffle(order, splitmix64(seed ^ 0xf01dULL));
    const auto kk = static_cast<std::size_t>(k);
    std::vector<std::size_t> fold_of(n);
    std::size_t pos = 0;
    for (std::size_t f = 0; f < kk; ++f) {
        const std::size_t size = n / kk + (f < n % kk ? 1 : 0);
        for (std::size_t j = 0; j < size; ++j) fold_of[order[pos++]] = f;
    }
    std::vector<Fold> folds(kk);
    for (std::size_t i = 0; i < n; ++i) {
        for (std::size_t f = 0; f < kk; ++f) (f == fold_of[i] ? folds[f].test : folds[f].train).push_back(i);
    }
    return folds;
}

void write_atomic(const std::filesystem::path& path, const std::string& text) {
    auto tmp = path;
    tmp += ".tmp";
    {
        std::ofstream out(tmp, std::ios::binary);
        if (!out) throw ParseError("cannot write " + tmp.string());
        out << text;
        if (!out) throw ParseError("failed writing " + tmp.string());
    }
    std::filesystem::rename(tmp, path);
}

nlohmann::json read_json(const std::filesystem::path& path) {
    std::ifstream in(path);
    if (!in) throw ParseError("cannot read " + path.string());
    try {
        return nlohmann::json::parse(in);
    } catch (const nlohmann::json::exception& e) {
        throw ParseError(path.string() + ": " + e.what());
    }
}

}  // namespace gicnet
