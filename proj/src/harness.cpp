#include "fkbma/harness.hpp"

#include <algorithm>
#include <atomic>
#include <cmath>
#include <cstdlib>
#include <fstream>
#include <limits>
#include <mutex>
#include <sstream>
#include <stdexcept>
#include <thread>

#include <json.hpp>

namespace fkbma {

namespace {

using nlohmann::json;

constexpr std::uint64_t kExternalStream = std::numeric_limits<std::uint64_t>::max();

void reject_unknown(const json& obj, std::initializer_list<const char*> allowed, const std::string& where) {
    if (!obj.is_object()) throw std::invalid_argument(where + " must be a JSON object");
    for (const auto& [key, _] : obj.items()) {
        if (std::find_if(allowed.begin(), allowed.end(), [&](const char* a) { return key == a; }) == allowed.end())
            throw std::invalid_argument("unknown configuration key: " + (where.empty() ? key : where + "." + key));
    }
}

template <typename T>
void read(const json& obj, const char* key, T& out, const std::string& where) {
    if (!obj.contains(key)) return;
    try {
        out = obj.at(key).get<T>();
    } catch (const json::exception&) {
        throw std::invalid_argument("configuration key " + where + key + " has the wrong type");
    }
}

void require(bool ok, const std::string& field, const std::string& range) {
    if (!ok) throw std::invalid_argument("configuration field " + field + " out of range: must be " + range);
}

std::string join(const std::vector<std::string>& items, char sep) {
    std::string out;
    for (std::size_t i = 0; i < items.size(); ++i) {
        if (i) out += sep;
        out += items[i];
    }
    return out;
}

std::string number(double v) {
    std::ostringstream os;
    os.precision(10);
    os << v;
    return os.str();
}

Estimate proportion(const std::vector<double>& values) {
    if (values.empty()) return {};
    double p = 0.0;
    for (double v : values) p += v;
    p /= static_cast<double>(values.size());
    return {p, std::sqrt(p * (1.0 - p) / static_cast<double>(values.size()))};
}

Estimate sample_mean(const std::vector<double>& values) {
    if (values.empty()) return {};
    const double n = static_cast<double>(values.size());
    double m = 0.0;
    for (double v : values) m += v;
    m /= n;
    if (values.size() < 2) return {m, 0.0};
    double ss = 0.0;
    for (double v : values) ss += (v - m) * (v - m);
    return {m, std::sqrt(ss / (n - 1.0) / n)};
}

}  // namespace

void DesignConfig::validate() const {
    find_scenario(scenario);
    require(replications >= 1, "replications", ">= 1");
    require(external_test_size >= 1, "external_test_size", ">= 1");
    require(threads >= 0, "threads", ">= 0");
    const auto& th = design.thresholds;
    require(th.B1 > 0 && th.B1 < 1, "thresholds.B1", "in (0,1)");
    require(th.B2 > 0 && th.B2 < 1, "thresholds.B2", "in (0,1)");
    require(th.pi >= 0 && th.pi < 1, "thresholds.pi", "in [0,1)");
    require(std::isfinite(th.b1), "thresholds.b1", "finite");
    require(std::isfinite(th.b2), "thresholds.b2", "finite");
    require(std::isfinite(design.e1), "thresholds.e1", "finite");
    require(design.alpha > 0 && design.alpha < 1, "thresholds.alpha", "in (0,1)");
    const auto& pr = design.prior;
    require(pr.lambda1 > 0, "priors.lambda1", "> 0");
    require(pr.lambda2 > 0, "priors.lambda2", "> 0");
    require(pr.sigma_B > 0, "priors.sigma_B", "> 0");
    require(pr.a0 > 0, "priors.a0", "> 0");
    require(pr.b0 > 0, "priors.b0", "> 0");
    const auto& s = design.sampler;
    require(s.burn_in >= 1, "sampler.burn_in", ">= 1");
    require(s.n_samples >= 1, "sampler.n_samples", ">= 1");
    require(s.thin >= 1, "sampler.thin", ">= 1");
    require(s.b > 0 && s.b < 1, "sampler.b", "in (0,1)");
    require(s.c > 0 && s.c < 1, "sampler.c", "in (0,1)");
    require(!s.w || *s.w > 0, "sampler.w", "> 0");
    require(s.sigma_v > 0, "sampler.sigma_v", "> 0");
    require(s.sigma_u > 0, "sampler.sigma_u", "> 0");
    require(s.sigma_eps > 0, "sampler.sigma_eps", "> 0");
    try {
        design.schedule.validate();
    } catch (const std::invalid_argument& e) {
        throw std::invalid_argument(std::string("configuration field schedule out of range: ") + e.what());
    }
    require(design.candidate_knots >= 1 && design.candidate_knots <= 64, "candidate_knots", "in [1,64]");
    require(design.treatment_probability > 0 && design.treatment_probability < 1, "treatment_probability",
            "in (0,1)");
    require(design.prune_cutoff >= 0 && design.prune_cutoff < 1, "prune_cutoff", "in [0,1)");
}

void apply_profile(DesignConfig& config, McmcProfile profile) {
    auto& s = config.design.sampler;
    if (profile == McmcProfile::Full) {
        s.burn_in = 30000;
        s.n_samples = 2000;
        s.thin = 10;
    } else {
        s.burn_in = 3000;
        s.n_samples = 500;
        s.thin = 5;
        config.replications = std::min(config.replications, 50);
    }
}

DesignConfig parse_config(const std::string& json_text) {
    json doc;
    try {
        doc = json::parse(json_text);
    } catch (const json::parse_error& e) {
        throw std::invalid_argument(std::string("malformed configuration: ") + e.what());
    }
    reject_unknown(doc,
                   {"scenario", "replications", "seed", "external_test_size", "threads", "thresholds", "priors",
                    "sampler", "schedule", "candidate_knots", "treatment_probability", "prune_cutoff"},
                   "");
    DesignConfig c;
    if (!doc.contains("scenario")) throw std::invalid_argument("configuration requires a scenario id");
    read(doc, "scenario", c.scenario, "");
    const Scenario scenario = find_scenario(c.scenario);
    c.design.alpha = scenario.default_alpha();
    c.design.prior.lambda1 = scenario.default_lambda1();

    read(doc, "replications", c.replications, "");
    read(doc, "seed", c.seed, "");
    read(doc, "external_test_size", c.external_test_size, "");
    read(doc, "threads", c.threads, "");
    read(doc, "candidate_knots", c.design.candidate_knots, "");
    read(doc, "treatment_probability", c.design.treatment_probability, "");
    read(doc, "prune_cutoff", c.design.prune_cutoff, "");
    if (doc.contains("schedule")) read(doc, "schedule", c.design.schedule.analysis_sizes, "");

    if (doc.contains("thresholds")) {
        const auto& t = doc["thresholds"];
        reject_unknown(t, {"e1", "b1", "b2", "B1", "B2", "alpha", "pi"}, "thresholds");
        read(t, "e1", c.design.e1, "thresholds.");
        read(t, "b1", c.design.thresholds.b1, "thresholds.");
        read(t, "b2", c.design.thresholds.b2, "thresholds.");
        read(t, "B1", c.design.thresholds.B1, "thresholds.");
        read(t, "B2", c.design.thresholds.B2, "thresholds.");
        read(t, "alpha", c.design.alpha, "thresholds.");
        read(t, "pi", c.design.thresholds.pi, "thresholds.");
    }
    if (doc.contains("priors")) {
        const auto& p = doc["priors"];
        reject_unknown(p, {"lambda1", "lambda2", "sigma_B", "a0", "b0"}, "priors");
        read(p, "lambda1", c.design.prior.lambda1, "priors.");
        read(p, "lambda2", c.design.prior.lambda2, "priors.");
        read(p, "sigma_B", c.design.prior.sigma_B, "priors.");
        read(p, "a0", c.design.prior.a0, "priors.");
        read(p, "b0", c.design.prior.b0, "priors.");
    }
    if (doc.contains("sampler")) {
        const auto& s = doc["sampler"];
        reject_unknown(s, {"burn_in", "n_samples", "thin", "b", "c", "w", "sigma_v", "sigma_u", "sigma_eps"},
                       "sampler");
        auto& sc = c.design.sampler;
        read(s, "burn_in", sc.burn_in, "sampler.");
        read(s, "n_samples", sc.n_samples, "sampler.");
        read(s, "thin", sc.thin, "sampler.");
        read(s, "b", sc.b, "sampler.");
        read(s, "c", sc.c, "sampler.");
        if (s.contains("w") && !s["w"].is_null()) {
            double w = 0.0;
            read(s, "w", w, "sampler.");
            sc.w = w;
        }
        read(s, "sigma_v", sc.sigma_v, "sampler.");
        read(s, "sigma_u", sc.sigma_u, "sampler.");
        read(s, "sigma_eps", sc.sigma_eps, "sampler.");
    }
    c.validate();
    return c;
}

DesignConfig load_config(const std::filesystem::path& path) {
    std::ifstream in(path);
    if (!in) throw std::invalid_argument("cannot open configuration file: " + path.string());
    std::stringstream buf;
    buf << in.rdbuf();
    return parse_config(buf.str());
}

std::string config_to_json(const DesignConfig& c) {
    const auto& d = c.design;
    json doc;
    doc["scenario"] = c.scenario;
    doc["replications"] = c.replications;
    doc["seed"] = c.seed;
    doc["external_test_size"] = c.external_test_size;
    doc["threads"] = c.threads;
    doc["thresholds"] = {{"e1", d.e1},
                         {"b1", d.thresholds.b1},
                         {"b2", d.thresholds.b2},
                         {"B1", d.thresholds.B1},
                         {"B2", d.thresholds.B2},
                         {"alpha", d.alpha},
                         {"pi", d.thresholds.pi}};
    doc["priors"] = {{"lambda1", d.prior.lambda1},
                     {"lambda2", d.prior.lambda2},
                     {"sigma_B", d.prior.sigma_B},
                     {"a0", d.prior.a0},
                     {"b0", d.prior.b0}};
    doc["sampler"] = {{"burn_in", d.sampler.burn_in},
                      {"n_samples", d.sampler.n_samples},
                      {"thin", d.sampler.thin},
                      {"b", d.sampler.b},
                      {"c", d.sampler.c},
                      {"w", d.sampler.w ? json(*d.sampler.w) : json(nullptr)},
                      {"sigma_v", d.sampler.sigma_v},
                      {"sigma_u", d.sampler.sigma_u},
                      {"sigma_eps", d.sampler.sigma_eps}};
    doc["schedule"] = d.schedule.analysis_sizes;
    doc["candidate_knots"] = d.candidate_knots;
    doc["treatment_probability"] = d.treatment_probability;
    doc["prune_cutoff"] = d.prune_cutoff;
    return doc.dump(2) + "\n";
}

bool operator==(const DesignConfig& a, const DesignConfig& b) {
    const auto& x = a.design;
    const auto& y = b.design;
    return a.scenario == b.scenario && a.replications == b.replications && a.seed == b.seed &&
           a.external_test_size == b.external_test_size && a.threads == b.threads && x.e1 == y.e1 &&
           x.alpha == y.alpha && x.thresholds.b1 == y.thresholds.b1 && x.thresholds.b2 == y.thresholds.b2 &&
           x.thresholds.B1 == y.thresholds.B1 && x.thresholds.B2 == y.thresholds.B2 &&
           x.thresholds.pi == y.thresholds.pi && x.prior.lambda1 == y.prior.lambda1 &&
           x.prior.lambda2 == y.prior.lambda2 && x.prior.sigma_B == y.prior.sigma_B && x.prior.a0 == y.prior.a0 &&
           x.prior.b0 == y.prior.b0 && x.sampler.burn_in == y.sampler.burn_in &&
           x.sampler.n_samples == y.sampler.n_samples && x.sampler.thin == y.sampler.thin &&
           x.sampler.b == y.sampler.b && x.sampler.c == y.sampler.c && x.sampler.w == y.sampler.w &&
           x.sampler.sigma_v == y.sampler.sigma_v && x.sampler.sigma_u == y.sampler.sigma_u &&
           x.sampler.sigma_eps == y.sampler.sigma_eps && x.schedule.analysis_sizes == y.schedule.analysis_sizes &&
           x.candidate_knots == y.candidate_knots && x.treatment_probability == y.treatment_probability &&
           x.prune_cutoff == y.prune_cutoff;
}

OperatingCharacteristics aggregate(const std::vector<TrialRecord>& records) {
    std::vector<double> power, gen_power, markers, accuracy, size, nonconv;
    for (const auto& r : records) {
        if (!r.valid) continue;
        const bool eff = is_efficacy(r.verdict);
        power.push_back(eff);
        gen_power.push_back(eff && r.correct_markers);
        markers.push_back(r.correct_markers);
        accuracy.push_back(r.accuracy);
        size.push_back(r.enrolled_n);
        nonconv.push_back(!r.converged);
    }
    OperatingCharacteristics oc;
    oc.replications = static_cast<int>(power.size());
    oc.power = proportion(power);
    oc.generalized_power = proportion(gen_power);
    oc.correct_marker_rate = proportion(markers);
    oc.accuracy = sample_mean(accuracy);
    oc.mean_sample_size = sample_mean(size);
    oc.nonconvergence_rate = proportion(nonconv);
    return oc;
}

std::pair<Eigen::MatrixXd, Eigen::MatrixXd> external_test_set(const Scenario& scenario, const DesignConfig& config) {
    Rng rng = make_stream(config.seed, kExternalStream);
    const auto n = static_cast<Eigen::Index>(config.external_test_size);
    Eigen::MatrixXd x(n, scenario.continuous_count);
    Eigen::MatrixXd z(n, static_cast<Eigen::Index>(scenario.binary_prevalences.size()));
    for (Eigen::Index i = 0; i < n; ++i) {
        const Profile p = scenario.generate_patient(rng);
        for (Eigen::Index j = 0; j < x.cols(); ++j) x(i, j) = p.x[static_cast<std::size_t>(j)];
        for (Eigen::Index j = 0; j < z.cols(); ++j) z(i, j) = p.z[static_cast<std::size_t>(j)];
    }
    return {x, z};
}

TrialRecord run_replication(const Scenario& scenario, const DesignConfig& config, int replication,
                            const Eigen::MatrixXd& external_x, const Eigen::MatrixXd& external_z) {
    TrialRecord rec;
    rec.replication = replication;
    Rng rng = make_stream(config.seed, static_cast<std::uint64_t>(replication));
    try {
        const TrialResult res = run_trial(scenario, config.design, rng);
        rec.verdict = res.verdict;
        rec.stop_stage = res.stop_stage;
        rec.enrolled_n = res.enrolled_n;
        rec.selected_variables = res.selected_variables;
        rec.stagewise_prevalence = res.stagewise_prevalence;
        rec.correct_markers = res.selected_variables == scenario.true_tailoring();
        rec.converged = std::all_of(res.convergence_flags.begin(), res.convergence_flags.end(), [](bool b) { return b; });
        rec.max_abs_geweke = *std::max_element(res.max_abs_geweke.begin(), res.max_abs_geweke.end());
        const auto actions = recommend(res, external_x, external_z);
        long long correct = 0;
        for (Eigen::Index i = 0; i < external_x.rows(); ++i) {
            const Eigen::VectorXd xi = external_x.row(i).transpose();
            const Eigen::VectorXd zi = external_z.row(i).transpose();
            const bool treat_best =
                scenario.true_gamma(std::span<const double>(xi.data(), static_cast<std::size_t>(xi.size())),
                                    std::span<const double>(zi.data(), static_cast<std::size_t>(zi.size()))) > 0.0;
            correct += (actions[static_cast<std::size_t>(i)] == Action::Treat) == treat_best;
        }
        rec.accuracy = static_cast<double>(correct) / static_cast<double>(external_x.rows());
    } catch (const std::exception& e) {
        rec.valid = false;
        rec.error = e.what();
    }
    return rec;
}

int resolve_threads(const DesignConfig& config) {
    if (const char* env = std::getenv("FKBMA_THREADS")) {
        char* end = nullptr;
        const long v = std::strtol(env, &end, 10);
        if (end == env || *end != '\0' || v < 1) throw std::invalid_argument("FKBMA_THREADS must be a positive integer");
        return static_cast<int>(v);
    }
    if (config.threads > 0) return config.threads;
    return std::max(1u, std::thread::hardware_concurrency());
}

StudyResult run_study(const DesignConfig& config, const std::function<void(const TrialRecord&)>& on_record) {
    config.validate();
    const Scenario scenario = find_scenario(config.scenario);
    const auto [ext_x, ext_z] = external_test_set(scenario, config);

    StudyResult out;
    out.records.resize(static_cast<std::size_t>(config.replications));
    std::atomic<int> next{0};
    std::mutex report;
    auto worker = [&]() {
        for (int r = next++; r < config.replications; r = next++) {
            TrialRecord rec = run_replication(scenario, config, r, ext_x, ext_z);
            std::lock_guard lock(report);
            if (on_record) on_record(rec);
            out.records[static_cast<std::size_t>(r)] = std::move(rec);
        }
    };
    const int n_threads = std::min(resolve_threads(config), config.replications);
    std::vector<std::thread> pool;
    for (int i = 1; i < n_threads; ++i) pool.emplace_back(worker);
    worker();
    for (auto& t : pool) t.join();

    std::vector<TrialRecord> converged;
    for (const auto& r : out.records) {
        if (!r.valid) ++out.failed;
        else if (r.converged) converged.push_back(r);
    }
    out.inclusive = aggregate(out.records);
    out.converged_only = aggregate(converged);
    return out;
}

std::string trials_csv(const std::vector<TrialRecord>& records) {
    std::ostringstream os;
    os << "replication,valid,verdict,efficacy,stop_stage,enrolled_n,selected_variables,correct_markers,"
          "stagewise_prevalence,accuracy,converged,max_abs_geweke,error\n";
    for (const auto& r : records) {
        std::vector<std::string> prev;
        for (double p : r.stagewise_prevalence) prev.push_back(number(p));
        std::string error = r.error;
        std::replace(error.begin(), error.end(), ',', ';');
        std::replace(error.begin(), error.end(), '\n', ' ');
        os << r.replication << ',' << (r.valid ? 1 : 0) << ',' << (r.valid ? verdict_name(r.verdict) : "") << ','
           << (r.valid && is_efficacy(r.verdict) ? 1 : 0) << ',' << r.stop_stage << ',' << r.enrolled_n << ','
           << join(r.selected_variables, ';') << ',' << (r.correct_markers ? 1 : 0) << ',' << join(prev, ';')
           << ',' << number(r.accuracy) << ',' << (r.converged ? 1 : 0) << ',' << number(r.max_abs_geweke) << ','
           << error << '\n';
    }
    return os.str();
}

std::string summary_csv(const StudyResult& result) {
    std::ostringstream os;
    os << "subset,metric,value,se,replications\n";
    auto rows = [&](const char* subset, const OperatingCharacteristics& oc) {
        const std::pair<const char*, const Estimate*> metrics[] = {
            {"power", &oc.power},
            {"generalized_power", &oc.generalized_power},
            {"correct_marker_rate", &oc.correct_marker_rate},
            {"accuracy", &oc.accuracy},
            {"mean_sample_size", &oc.mean_sample_size},
            {"nonconvergence_rate", &oc.nonconvergence_rate},
        };
        for (const auto& [name, est] : metrics)
            os << subset << ',' << name << ',' << number(est->value) << ',' << number(est->se) << ','
               << oc.replications << '\n';
    };
    rows("all", result.inclusive);
    rows("converged", result.converged_only);
    os << "all,failed_replications," << result.failed << ",0," << result.records.size() << '\n';
    return os.str();
}

void emit_results(const StudyResult& result, const DesignConfig& config, const std::filesystem::path& directory) {
    std::error_code ec;
    std::filesystem::create_directories(directory, ec);
    if (ec) throw std::runtime_error("cannot create output directory " + directory.string() + ": " + ec.message());
    auto write = [&](const char* name, const std::string& content) {
        const auto path = directory / name;
        std::ofstream out(path, std::ios::binary);
        if (!out) throw std::runtime_error("cannot write " + path.string());
        out << content;
        if (!out) throw std::runtime_error("failed writing " + path.string());
    };
    write("trials.csv", trials_csv(result.records));
    write("summary.csv", summary_csv(result));
    write("config.json", config_to_json(config));
}

}  // namespace fkbma
