#include <algorithm>
#include <fstream>
#include <set>
#include <sstream>

#include <openssl/evp.h>

#include "funloc/cli_io.hpp"
#include "funloc/errors.hpp"

namespace funloc {

using nlohmann::json;

namespace {

/// JSON object reader that records which keys were consumed, so leftovers can be rejected.
class ObjectReader {
public:
    ObjectReader(const json& node, std::string path) : node_(node), path_(std::move(path)) {
        if (!node_.is_object()) fail(path_.empty() ? "<root>" : path_, "must be an object");
    }

    bool has(const std::string& key) const { return node_.contains(key); }

    const json& at(const std::string& key) {
        seen_.insert(key);
        if (!node_.contains(key)) fail(child(key), "is required");
        return node_.at(key);
    }

    double number(const std::string& key) {
        const json& v = at(key);
        if (!v.is_number()) fail(child(key), "must be a number");
        return v.get<double>();
    }
    double number_or(const std::string& key, double fallback) { return has(key) ? number(key) : (seen_.insert(key), fallback); }

    long long integer(const std::string& key) {
        const json& v = at(key);
        if (!v.is_number_integer()) fail(child(key), "must be an integer");
        return v.get<long long>();
    }
    long long integer_or(const std::string& key, long long fallback) {
        return has(key) ? integer(key) : (seen_.insert(key), fallback);
    }

    std::string string(const std::string& key) {
        const json& v = at(key);
        if (!v.is_string()) fail(child(key), "must be a string");
        return v.get<std::string>();
    }

    bool boolean_or(const std::string& key, bool fallback) {
        if (!has(key)) return fallback;
        const json& v = at(key);
        if (!v.is_boolean()) fail(child(key), "must be a boolean");
        return v.get<bool>();
    }

    std::vector<double> numbers(const std::string& key) {
        const json& v = at(key);
        if (!v.is_array() || v.empty()) fail(child(key), "must be a nonempty array of numbers");
        std::vector<double> out;
        for (std::size_t i = 0; i < v.size(); ++i) {
            if (!v[i].is_number()) fail(child(key) + "[" + std::to_string(i) + "]", "must be a number");
            out.push_back(v[i].get<double>());
        }
        return out;
    }

    std::string child(const std::string& key) const { return path_.empty() ? key : path_ + "." + key; }

    void finish() const {
        for (auto it = node_.begin(); it != node_.end(); ++it)
            if (!seen_.count(it.key())) fail(child(it.key()), "unknown key");
    }

    [[noreturn]] static void fail(const std::string& path, const std::string& message) {
        throw ConfigError(path + ": " + message);
    }

private:
    const json& node_;
    std::string path_;
    std::set<std::string> seen_;
};

void require(bool ok, const std::string& path, const std::string& message) {
    if (!ok) ObjectReader::fail(path, message);
}

RegressionTarget::Kind parse_target_kind(const std::string& s, const std::string& path) {
    using Kind = RegressionTarget::Kind;
    if (s == "ExpLinear") return Kind::ExpLinear;
    if (s == "CosLinear") return Kind::CosLinear;
    if (s == "Quadratic") return Kind::Quadratic;
    if (s == "PolyCoord") return Kind::PolyCoord;
    ObjectReader::fail(path, "must be one of ExpLinear, CosLinear, Quadratic, PolyCoord");
}

const char* target_kind_name(RegressionTarget::Kind k) {
    switch (k) {
    case RegressionTarget::Kind::ExpLinear: return "ExpLinear";
    case RegressionTarget::Kind::CosLinear: return "CosLinear";
    case RegressionTarget::Kind::Quadratic: return "Quadratic";
    case RegressionTarget::Kind::PolyCoord: return "PolyCoord";
    }
    return "?";
}

NoiseModel::Law parse_law(const std::string& s, const std::string& path) {
    if (s == "Gaussian") return NoiseModel::Law::Gaussian;
    if (s == "Uniform") return NoiseModel::Law::Uniform;
    if (s == "None") return NoiseModel::Law::None;
    ObjectReader::fail(path, "must be one of Gaussian, Uniform, None");
}

const char* law_name(NoiseModel::Law law) {
    switch (law) {
    case NoiseModel::Law::Gaussian: return "Gaussian";
    case NoiseModel::Law::Uniform: return "Uniform";
    case NoiseModel::Law::None: return "None";
    }
    return "?";
}

}  // namespace

LoadedConfig parse_config(const json& doc) {
    LoadedConfig loaded;
    ExperimentConfig& c = loaded.config;
    ObjectReader root(doc, "");

    {
        ObjectReader model(root.at("model"), "model");
        ObjectReader eigen(model.at("eigen"), "model.eigen");
        c.model.eigen.kind = eigen.string("kind");
        c.model.eigen.C_lambda = eigen.number_or("C_lambda", 1.0);
        require(c.model.eigen.C_lambda > 0.0, "model.eigen.C_lambda", "must be > 0");
        if (c.model.eigen.kind == "exp") {
            c.model.eigen.C_gamma1 = eigen.number_or("C_gamma1", 1.0);
            c.model.eigen.gamma = eigen.number("gamma");
            require(c.model.eigen.C_gamma1 > 0.0, "model.eigen.C_gamma1", "must be > 0");
            require(c.model.eigen.gamma > 0.0, "model.eigen.gamma", "must be > 0");
        } else if (c.model.eigen.kind == "poly") {
            c.model.eigen.p = eigen.number("p");
            require(c.model.eigen.p > 0.0, "model.eigen.p", "must be > 0");
        } else {
            ObjectReader::fail("model.eigen.kind", "must be \"exp\" or \"poly\"");
        }
        eigen.finish();
        c.model.mean_coeffs = model.has("mean_coeffs") ? model.numbers("mean_coeffs") : std::vector<double>{0.0};
        c.model.L = static_cast<int>(model.integer_or("L", 0));
        require(c.model.L >= 0, "model.L", "must be >= 0");
        require(c.model.eigen.kind == "exp" || c.model.L > 0, "model.L", "is required for the poly eigenvalue family");
        model.finish();
    }
    {
        ObjectReader target(root.at("target"), "target");
        c.target.kind = parse_target_kind(target.string("kind"), "target.kind");
        if (c.target.kind == RegressionTarget::Kind::PolyCoord) {
            const json& terms = target.at("terms");
            require(terms.is_array() && !terms.empty(), "target.terms", "must be a nonempty array");
            c.target.terms.clear();
            for (std::size_t i = 0; i < terms.size(); ++i) {
                const std::string p = "target.terms[" + std::to_string(i) + "]";
                ObjectReader term(terms[i], p);
                RegressionTarget::PolyTerm t;
                const json& e = term.at("exponents");
                require(e.is_array() && !e.empty(), p + ".exponents", "must be a nonempty integer array");
                for (std::size_t q = 0; q < e.size(); ++q) {
                    require(e[q].is_number_integer() && e[q].get<int>() >= 0,
                            p + ".exponents[" + std::to_string(q) + "]", "must be an integer >= 0");
                    t.exponents.push_back(e[q].get<int>());
                }
                t.coefficient = term.number("coefficient");
                term.finish();
                c.target.terms.push_back(std::move(t));
            }
            const std::size_t P = c.target.terms.front().exponents.size();
            for (const auto& t : c.target.terms)
                require(t.exponents.size() == P, "target.terms", "all exponent vectors must have the same length");
            c.target.theta_coeffs = {0.0};
        } else {
            c.target.theta_coeffs = target.numbers("theta_coeffs");
        }
        target.finish();
    }
    {
        ObjectReader noise(root.at("noise"), "noise");
        c.noise.sigma = noise.number("sigma");
        require(c.noise.sigma >= 0.0, "noise.sigma", "must be >= 0");
        c.noise.law = noise.has("law") ? parse_law(noise.string("law"), "noise.law") : NoiseModel::Law::Gaussian;
        noise.finish();
    }
    c.site_coeffs = root.has("site_coeffs") ? root.numbers("site_coeffs") : c.model.mean_coeffs;
    c.delta = root.number_or("delta", 0.5);
    require(c.delta > 0.0 && c.delta < 1.0, "delta", "must lie in (0, 1)");

    {
        const json& grid = root.at("n_grid");
        require(grid.is_array() && !grid.empty(), "n_grid", "must be a nonempty array of integers");
        c.n_grid.clear();
        for (std::size_t i = 0; i < grid.size(); ++i) {
            require(grid[i].is_number_integer() && grid[i].get<long long>() >= 10,
                    "n_grid[" + std::to_string(i) + "]", "must be an integer >= 10");
            c.n_grid.push_back(grid[i].get<std::size_t>());
        }
        if (!std::is_sorted(c.n_grid.begin(), c.n_grid.end())) {
            std::sort(c.n_grid.begin(), c.n_grid.end());
            loaded.notices.push_back("n_grid was not sorted; sorted ascending");
        }
        require(std::adjacent_find(c.n_grid.begin(), c.n_grid.end()) == c.n_grid.end(), "n_grid",
                "must not contain duplicates");
    }
    const long long reps = root.integer_or("replications", 200);
    require(reps >= 1, "replications", "must be >= 1");
    c.replications = static_cast<std::size_t>(reps);

    if (root.has("tuning")) {
        ObjectReader tuning(root.at("tuning"), "tuning");
        c.tuning.D0 = tuning.number_or("D0", c.tuning.D0);
        c.tuning.D1 = tuning.number_or("D1", c.tuning.D1);
        require(c.tuning.D0 > 0.0, "tuning.D0", "must be > 0");
        require(c.tuning.D1 > 0.0, "tuning.D1", "must be > 0");
        if (tuning.has("J_override")) {
            c.tuning.J_override = static_cast<int>(tuning.integer("J_override"));
            require(*c.tuning.J_override >= 1, "tuning.J_override", "must be >= 1");
        }
        if (tuning.has("K_override")) {
            c.tuning.K_override = static_cast<int>(tuning.integer("K_override"));
            require(*c.tuning.K_override >= 1, "tuning.K_override", "must be >= 1");
        }
        if (tuning.has("c1")) {
            c.tuning.c1 = tuning.number("c1");
            require(c.tuning.c1 > 0.0, "tuning.c1", "must be > 0");
            c.c1_configured = true;
        }
        if (tuning.has("gamma")) {
            c.gamma_override = tuning.number("gamma");
            require(*c.gamma_override > 0.0, "tuning.gamma", "must be > 0");
        }
        tuning.finish();
    }
    if (root.has("fixed_arms")) {
        const json& arms = root.at("fixed_arms");
        require(arms.is_array(), "fixed_arms", "must be an array of [J, K] pairs");
        c.fixed_arms.clear();
        for (std::size_t i = 0; i < arms.size(); ++i) {
            const std::string p = "fixed_arms[" + std::to_string(i) + "]";
            require(arms[i].is_array() && arms[i].size() == 2 && arms[i][0].is_number_integer() &&
                        arms[i][1].is_number_integer() && arms[i][0].get<int>() >= 1 && arms[i][1].get<int>() >= 1,
                    p, "must be a pair [J, K] of integers >= 1");
            c.fixed_arms.emplace_back(arms[i][0].get<int>(), arms[i][1].get<int>());
        }
    }
    c.baseline = root.boolean_or("baseline", true);
    c.smallball_floor = root.number_or("smallball_floor", 0.05);
    require(c.smallball_floor >= 0.0 && c.smallball_floor <= 1.0, "smallball_floor", "must lie in [0, 1]");
    const long long seed = root.integer_or("seed", 1);
    require(seed >= 0, "seed", "must be >= 0");
    c.seed = static_cast<std::uint64_t>(seed);

    if (root.has("diagnose")) {
        ObjectReader d(root.at("diagnose"), "diagnose");
        c.diagnose.n = static_cast<std::size_t>(d.integer_or("n", static_cast<long long>(c.diagnose.n)));
        c.diagnose.J = static_cast<int>(d.integer_or("J", c.diagnose.J));
        c.diagnose.K = static_cast<int>(d.integer_or("K", c.diagnose.K));
        c.diagnose.u0_samples = static_cast<std::size_t>(d.integer_or("u0_samples", static_cast<long long>(c.diagnose.u0_samples)));
        c.diagnose.gamma_draws = static_cast<std::size_t>(d.integer_or("gamma_draws", static_cast<long long>(c.diagnose.gamma_draws)));
        c.diagnose.gamma_j_max = static_cast<int>(d.integer_or("gamma_j_max", c.diagnose.gamma_j_max));
        require(c.diagnose.n >= 1, "diagnose.n", "must be >= 1");
        require(c.diagnose.J >= 1, "diagnose.J", "must be >= 1");
        require(c.diagnose.K >= 1, "diagnose.K", "must be >= 1");
        require(c.diagnose.u0_samples >= 1, "diagnose.u0_samples", "must be >= 1");
        require(c.diagnose.gamma_draws >= 2, "diagnose.gamma_draws", "must be >= 2");
        require(c.diagnose.gamma_j_max >= 1, "diagnose.gamma_j_max", "must be >= 1");
        d.finish();
    }
    root.finish();
    return loaded;
}

LoadedConfig load_config(const std::filesystem::path& path) {
    const std::string text = read_text_file(path);
    json doc;
    try {
        doc = json::parse(text);
    } catch (const json::parse_error& e) {
        throw ConfigError(path.string() + ": invalid JSON: " + e.what());
    }
    return parse_config(doc);
}

json config_to_json(const ExperimentConfig& c) {
    json eigen{{"kind", c.model.eigen.kind}, {"C_lambda", c.model.eigen.C_lambda}};
    if (c.model.eigen.kind == "exp") {
        eigen["C_gamma1"] = c.model.eigen.C_gamma1;
        eigen["gamma"] = c.model.eigen.gamma;
    } else {
        eigen["p"] = c.model.eigen.p;
    }
    json target{{"kind", target_kind_name(c.target.kind)}};
    if (c.target.kind == RegressionTarget::Kind::PolyCoord) {
        json terms = json::array();
        for (const auto& t : c.target.terms) terms.push_back({{"exponents", t.exponents}, {"coefficient", t.coefficient}});
        target["terms"] = terms;
    } else {
        target["theta_coeffs"] = c.target.theta_coeffs;
    }
    json tuning{{"D0", c.tuning.D0}, {"D1", c.tuning.D1}};
    if (c.tuning.J_override) tuning["J_override"] = *c.tuning.J_override;
    if (c.tuning.K_override) tuning["K_override"] = *c.tuning.K_override;
    if (c.c1_configured) tuning["c1"] = c.tuning.c1;
    if (c.gamma_override) tuning["gamma"] = *c.gamma_override;
    json arms = json::array();
    for (const auto& [J, K] : c.fixed_arms) arms.push_back({J, K});
    return json{
        {"model", {{"eigen", eigen}, {"mean_coeffs", c.model.mean_coeffs}, {"L", c.model.L}}},
        {"target", target},
        {"noise", {{"sigma", c.noise.sigma}, {"law", law_name(c.noise.law)}}},
        {"site_coeffs", c.site_coeffs},
        {"delta", c.delta},
        {"n_grid", c.n_grid},
        {"replications", c.replications},
        {"tuning", tuning},
        {"fixed_arms", arms},
        {"baseline", c.baseline},
        {"smallball_floor", c.smallball_floor},
        {"seed", c.seed},
        {"diagnose",
         {{"n", c.diagnose.n},
          {"J", c.diagnose.J},
          {"K", c.diagnose.K},
          {"u0_samples", c.diagnose.u0_samples},
          {"gamma_draws", c.diagnose.gamma_draws},
          {"gamma_j_max", c.diagnose.gamma_j_max}}},
    };
}

std::string sha256_hex(const std::string& bytes) {
    unsigned char digest[EVP_MAX_MD_SIZE];
    unsigned int len = 0;
    if (EVP_Digest(bytes.data(), bytes.size(), digest, &len, EVP_sha256(), nullptr) != 1)
        throw NumericalError("sha256 digest failed");
    static constexpr char hex[] = "0123456789abcdef";
    std::string out;
    out.reserve(2 * len);
    for (unsigned int i = 0; i < len; ++i) {
        out.push_back(hex[digest[i] >> 4]);
        out.push_back(hex[digest[i] & 0xF]);
    }
    return out;
}

std::string config_digest(const ExperimentConfig& config) { return sha256_hex(config_to_json(config).dump()); }

}  // namespace funloc
