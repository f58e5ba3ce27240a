#include "asvd/config.hpp"

#include <fstream>
#include <set>
#include <sstream>

#include "asvd/rng.hpp"

namespace asvd {

namespace {

using nlohmann::json;

std::string join_key(const std::string& prefix, const std::string& key) {
    return prefix.empty() ? key : prefix + "." + key;
}

// Walks one JSON object. Every key read is recorded; finish() rejects the rest.
class ObjectReader {
public:
    ObjectReader(const json& j, std::string path) : j_(j), path_(std::move(path)) {
        if (!j_.is_object()) throw SchemaError(path_, "expected an object");
    }

    bool has(const std::string& key) {
        seen_.insert(key);
        return j_.contains(key) && !j_.at(key).is_null();
    }

    const json& raw(const std::string& key) {
        seen_.insert(key);
        return j_.at(key);
    }

    std::string path(const std::string& key) const { return join_key(path_, key); }

    template <class T>
    void get(const std::string& key, T& out) {
        if (!has(key)) return;
        out = convert<T>(j_.at(key), path(key));
    }

    template <class T>
    static T convert(const json& v, const std::string& where) {
        if constexpr (std::is_same_v<T, bool>) {
            if (!v.is_boolean()) throw SchemaError(where, "expected a boolean");
        } else if constexpr (std::is_integral_v<T>) {
            if (!v.is_number_integer()) throw SchemaError(where, "expected an integer");
            if constexpr (std::is_unsigned_v<T>) {
                if (v.is_number_integer() && !v.is_number_unsigned() && v.get<long long>() < 0)
                    throw SchemaError(where, "expected a non-negative integer");
            }
        } else if constexpr (std::is_floating_point_v<T>) {
            if (!v.is_number()) throw SchemaError(where, "expected a number");
        } else if constexpr (std::is_same_v<T, std::string>) {
            if (!v.is_string()) throw SchemaError(where, "expected a string");
        }
        return v.get<T>();
    }

    template <class Enum, class Parse>
    void get_enum(const std::string& key, Enum& out, Parse parse) {
        if (!has(key)) return;
        const auto s = convert<std::string>(j_.at(key), path(key));
        try {
            out = parse(s);
        } catch (const std::invalid_argument& e) {
            throw SchemaError(path(key), e.what());
        }
    }

    void finish() const {
        for (auto it = j_.begin(); it != j_.end(); ++it)
            if (!seen_.count(it.key())) throw SchemaError(path(it.key()), "unknown key");
    }

private:
    const json& j_;
    std::string path_;
    std::set<std::string> seen_;
};

template <class F>
void checked(const std::string& where, F f) {
    try {
        f();
    } catch (const SchemaError&) {
        throw;
    } catch (const std::invalid_argument& e) {
        throw SchemaError(where, e.what());
    }
}

TaskStreamSpec read_task_spec(const json& j, const std::string& path) {
    TaskStreamSpec s;
    ObjectReader r(j, path);
    r.get_enum("family", s.family, task_family_from_string);
    r.get("task_count", s.task_count);
    r.get("train_samples", s.train_samples);
    r.get("test_samples", s.test_samples);
    r.get("dimension", s.dimension);
    r.get("noise", s.noise);
    r.get("classes", s.classes);
    r.get("target_dim", s.target_dim);
    r.get("separation", s.separation);
    r.finish();
    checked(path, [&] { s.validate(); });
    return s;
}

json task_spec_json(const TaskStreamSpec& s) {
    return {{"family", std::string(to_string(s.family))},
            {"task_count", s.task_count},
            {"train_samples", s.train_samples},
            {"test_samples", s.test_samples},
            {"dimension", s.dimension},
            {"noise", s.noise},
            {"classes", s.classes},
            {"target_dim", s.target_dim},
            {"separation", s.separation}};
}

std::string_view split_name(ImportanceSplit s) {
    return s == ImportanceSplit::train ? "train" : "test";
}

ImportanceSplit split_from_string(std::string_view s) {
    if (s == "train") return ImportanceSplit::train;
    if (s == "test") return ImportanceSplit::test;
    throw std::invalid_argument("unknown importance split '" + std::string(s) + "'");
}

void validate_order(const std::vector<int>& order, int task_count, const std::string& where) {
    if (static_cast<int>(order.size()) != task_count)
        throw SchemaError(where, "must list each of the " + std::to_string(task_count) + " tasks once");
    std::vector<bool> seen(static_cast<std::size_t>(task_count), false);
    for (int id : order) {
        if (id < 1 || id > task_count || seen[static_cast<std::size_t>(id - 1)])
            throw SchemaError(where, "is not a permutation of 1.." + std::to_string(task_count));
        seen[static_cast<std::size_t>(id - 1)] = true;
    }
}

}  // namespace

Network make_network(const NetworkConfig& config, int input_dim, int output_dim, std::uint64_t seed) {
    std::vector<LayerSpec> specs;
    Eigen::Index in = input_dim;
    for (int w : config.hidden) {
        specs.push_back({in, w, config.activation});
        in = w;
    }
    specs.push_back({in, output_dim, Activation::identity});
    Rng rng = named_stream(seed, "init");
    return Network::random(specs, rng, config.init_scale);
}

TrainerConfig ExperimentConfig::trainer_config(TrainerKind kind) const {
    TrainerConfig c;
    c.kind = kind;
    c.optimizer = optimizer;
    c.retention = retention;
    c.fixed_fraction = fixed_fraction;
    c.importance_samples = importance_samples;
    c.importance_split = importance_split;
    c.invariant_check_interval = debug_checks ? 1 : 100;
    c.track_first_order = track_first_order;
    return c;
}

std::vector<std::vector<int>> ExperimentConfig::orders_for_seed(std::uint64_t seed) const {
    if (!task_orders.empty()) return task_orders;
    std::vector<std::vector<int>> orders;
    std::vector<int> identity(static_cast<std::size_t>(tasks.task_count));
    for (int i = 0; i < tasks.task_count; ++i) identity[static_cast<std::size_t>(i)] = i + 1;
    orders.push_back(identity);
    Rng rng = named_stream(seed, "orders");
    for (int p = 1; p < permutations; ++p) {
        std::vector<int> order;
        for (Eigen::Index i : shuffled_indices(tasks.task_count, rng)) order.push_back(static_cast<int>(i) + 1);
        orders.push_back(std::move(order));
    }
    return orders;
}

TaskStreamSpec ExperimentConfig::task_spec_for_seed(std::uint64_t seed) const {
    TaskStreamSpec s = tasks;
    s.seed = seed;
    return s;
}

std::optional<TaskStreamSpec> ExperimentConfig::suite_spec_for_seed(std::uint64_t seed) const {
    if (!suite) return std::nullopt;
    TaskStreamSpec s = *suite;
    Rng rng = named_stream(seed, "suite");
    s.seed = rng();
    return s;
}

json ExperimentConfig::to_json() const {
    json trainer_list = json::array();
    for (TrainerKind k : trainers) trainer_list.push_back(std::string(to_string(k)));
    json hidden = json::array();
    for (int w : network.hidden) hidden.push_back(w);
    json j = {
        {"schema_version", kConfigSchemaVersion},
        {"tasks", task_spec_json(tasks)},
        {"network",
         {{"hidden", hidden},
          {"activation", std::string(to_string(network.activation))},
          {"init_scale", network.init_scale}}},
        {"trainers", trainer_list},
        {"optimizer",
         {{"kind", std::string(to_string(optimizer.kind))},
          {"learning_rate", optimizer.learning_rate},
          {"momentum", optimizer.momentum},
          {"epochs_per_task", optimizer.epochs_per_task},
          {"batch_size", optimizer.batch_size}}},
        {"retention", {{"mrr", retention.mrr()}, {"trr", retention.trr()}}},
        {"fixed_fraction", fixed_fraction},
        {"importance_samples", importance_samples},
        {"importance_split", std::string(split_name(importance_split))},
        {"track_first_order", track_first_order},
        {"debug_checks", debug_checks},
        {"halved_retention_ablation", halved_retention_ablation},
        {"seeds", seeds},
        {"task_orders", task_orders},
        {"permutations", permutations},
        {"suite", suite ? task_spec_json(*suite) : json(nullptr)},
        {"output_dir", output_dir},
        {"theory",
         {{"hierarchy_trials", theory.hierarchy_trials},
          {"blocks", theory.blocks},
          {"block_dim", theory.block_dim},
          {"update_norm_sq", theory.update_norm_sq},
          {"rayleigh_trials", theory.rayleigh_trials},
          {"rayleigh_dim", theory.rayleigh_dim},
          {"network_hessian", theory.network_hessian},
          {"network_dimension", theory.network_dimension},
          {"network_width", theory.network_width}}},
    };
    return j;
}

ExperimentConfig ExperimentConfig::from_json(const json& j) {
    ExperimentConfig c;
    ObjectReader r(j, "");
    if (!r.has("schema_version")) throw SchemaError("schema_version", "missing");
    const int version = ObjectReader::convert<int>(r.raw("schema_version"), "schema_version");
    if (version != kConfigSchemaVersion)
        throw SchemaError("schema_version", "unsupported version " + std::to_string(version));

    if (r.has("tasks")) c.tasks = read_task_spec(r.raw("tasks"), "tasks");

    if (r.has("network")) {
        ObjectReader n(r.raw("network"), "network");
        n.get("hidden", c.network.hidden);
        n.get_enum("activation", c.network.activation, activation_from_string);
        n.get("init_scale", c.network.init_scale);
        n.finish();
        for (int w : c.network.hidden)
            if (w < 1) throw SchemaError("network.hidden", "widths must be positive");
        if (!(c.network.init_scale > 0.0)) throw SchemaError("network.init_scale", "must be positive");
    }

    if (r.has("trainers")) {
        const json& list = r.raw("trainers");
        if (!list.is_array() || list.empty()) throw SchemaError("trainers", "expected a non-empty array");
        c.trainers.clear();
        for (std::size_t i = 0; i < list.size(); ++i) {
            const std::string where = "trainers[" + std::to_string(i) + "]";
            const auto s = ObjectReader::convert<std::string>(list[i], where);
            checked(where, [&] { c.trainers.push_back(trainer_kind_from_string(s)); });
        }
    }

    if (r.has("optimizer")) {
        ObjectReader o(r.raw("optimizer"), "optimizer");
        o.get_enum("kind", c.optimizer.kind, optimizer_kind_from_string);
        o.get("learning_rate", c.optimizer.learning_rate);
        o.get("momentum", c.optimizer.momentum);
        o.get("epochs_per_task", c.optimizer.epochs_per_task);
        o.get("batch_size", c.optimizer.batch_size);
        o.finish();
        checked("optimizer", [&] { c.optimizer.validate(); });
    }

    if (r.has("retention")) {
        ObjectReader o(r.raw("retention"), "retention");
        double mrr = c.retention.mrr();
        double trr = c.retention.trr();
        o.get("mrr", mrr);
        o.get("trr", trr);
        o.finish();
        checked("retention", [&] { c.retention = RetentionConfig(mrr, trr); });
    }

    r.get("fixed_fraction", c.fixed_fraction);
    r.get("importance_samples", c.importance_samples);
    r.get_enum("importance_split", c.importance_split, split_from_string);
    r.get("track_first_order", c.track_first_order);
    r.get("debug_checks", c.debug_checks);
    r.get("halved_retention_ablation", c.halved_retention_ablation);

    if (r.has("seeds")) {
        const json& list = r.raw("seeds");
        if (!list.is_array() || list.empty()) throw SchemaError("seeds", "expected a non-empty array");
        c.seeds.clear();
        for (std::size_t i = 0; i < list.size(); ++i)
            c.seeds.push_back(ObjectReader::convert<std::uint64_t>(list[i], "seeds[" + std::to_string(i) + "]"));
    }

    if (r.has("task_orders")) {
        const json& list = r.raw("task_orders");
        if (!list.is_array()) throw SchemaError("task_orders", "expected an array");
        for (std::size_t i = 0; i < list.size(); ++i) {
            const std::string where = "task_orders[" + std::to_string(i) + "]";
            if (!list[i].is_array()) throw SchemaError(where, "expected an array of task ids");
            std::vector<int> order;
            for (const json& v : list[i]) order.push_back(ObjectReader::convert<int>(v, where));
            validate_order(order, c.tasks.task_count, where);
            c.task_orders.push_back(std::move(order));
        }
    }
    r.get("permutations", c.permutations);
    if (c.permutations < 1) throw SchemaError("permutations", "must be >= 1");
    if (!c.task_orders.empty() && r.has("permutations") && c.permutations != 1)
        throw SchemaError("permutations", "cannot be combined with task_orders");

    if (r.has("suite")) {
        c.suite = read_task_spec(r.raw("suite"), "suite");
        if (c.suite->dimension != c.tasks.dimension) throw SchemaError("suite.dimension", "must match tasks.dimension");
        if (c.suite->output_dim() != c.tasks.output_dim() || c.suite->kind() != c.tasks.kind())
            throw SchemaError("suite", "output kind and size must match the task stream");
    }

    r.get("output_dir", c.output_dir);

    if (r.has("theory")) {
        TheoryConfig& t = c.theory;
        ObjectReader o(r.raw("theory"), "theory");
        o.get("hierarchy_trials", t.hierarchy_trials);
        o.get("blocks", t.blocks);
        o.get("block_dim", t.block_dim);
        o.get("update_norm_sq", t.update_norm_sq);
        o.get("rayleigh_trials", t.rayleigh_trials);
        o.get("rayleigh_dim", t.rayleigh_dim);
        o.get("network_hessian", t.network_hessian);
        o.get("network_dimension", t.network_dimension);
        o.get("network_width", t.network_width);
        o.finish();
        if (t.hierarchy_trials < 0 || t.rayleigh_trials < 0) throw SchemaError("theory", "trial counts must be >= 0");
        if (t.blocks < 1 || t.block_dim < 1 || t.rayleigh_dim < 1) throw SchemaError("theory", "sizes must be positive");
        if (t.network_dimension < 1 || t.network_width < 1) throw SchemaError("theory", "sizes must be positive");
        if (!(t.update_norm_sq > 0.0)) throw SchemaError("theory.update_norm_sq", "must be positive");
    }
    r.finish();

    if (!(c.fixed_fraction >= 0.0 && c.fixed_fraction <= 1.0))
        throw SchemaError("fixed_fraction", "must lie in [0, 1]");
    if (c.importance_samples < 1) throw SchemaError("importance_samples", "must be >= 1");
    return c;
}

ExperimentConfig load_config(const std::filesystem::path& path) {
    std::ifstream in(path);
    if (!in) throw std::runtime_error("cannot read config " + path.string());
    json j;
    try {
        j = json::parse(in);
    } catch (const json::parse_error& e) {
        throw SchemaError("", "invalid JSON in " + path.string() + ": " + e.what());
    }
    return ExperimentConfig::from_json(j);
}

void require_smooth_theory(const ExperimentConfig& config) {
    if (config.network.activation == Activation::relu)
        throw SchemaError("network.activation", "relu is not twice differentiable; use tanh or identity");
}

}  // namespace asvd
