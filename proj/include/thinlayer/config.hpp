/**
 * @file config.hpp
 * @brief JSON run configurations mapped onto ScenarioSpec.
 *
 * Unknown keys are rejected at every level. Errors carry the dotted key path
 * and the line of the offending key in the source text.
 */
#pragma once

#include <filesystem>
#include <fstream>
#include <sstream>
#include <stdexcept>
#include <string>
#include <vector>

#include <json.hpp>

#include "thinlayer/scenarios.hpp"

namespace thinlayer {

class ConfigError : public std::runtime_error {
public:
    ConfigError(std::string key, int line, const std::string& what)
        : std::runtime_error(format(key, line, what)), key_(std::move(key)), line_(line)
    {
    }
    const std::string& key() const { return key_; }
    int line() const { return line_; }

private:
    static std::string format(const std::string& key, int line, const std::string& what)
    {
        std::string s = "config";
        if (line > 0) s += ":" + std::to_string(line);
        if (!key.empty()) s += ": key '" + key + "'";
        return s + ": " + what;
    }
    std::string key_;
    int line_ = 0;
};

struct RunConfig {
    ScenarioSpec spec;
    std::string output_dir = "out";
    std::string source_path;  ///< file the config was read from, empty for strings
};

namespace detail {

using json = nlohmann::json;

class ConfigReader {
public:
    ConfigReader(std::string text, std::filesystem::path base) : text_(std::move(text)), base_(std::move(base)) {}

    RunConfig read()
    {
        json root;
        try {
            root = json::parse(text_);
        } catch (const json::parse_error& e) {
            const auto [line, col] = line_col(e.byte == 0 ? 0 : e.byte - 1);
            throw ConfigError("", line, "parse error at column " + std::to_string(col) + ": " + strip(e.what()));
        }
        if (!root.is_object()) throw ConfigError("", 1, "top level must be an object");
        RunConfig cfg;
        Obj top{this, root, "", 0};
        top.allow({"scenario", "name", "description", "mesh", "backend", "flux", "source", "initial", "scheme",
                   "theta", "dt", "steps", "t0", "solver", "seed", "snapshot_every", "expect", "output"});
        if (top.has("scenario")) {
            const auto name = top.str("scenario");
            try {
                cfg.spec = find_scenario(name);
            } catch (const ParameterError& e) {
                throw top.error("scenario", e.what());
            }
        }
        ScenarioSpec& s = cfg.spec;
        top.get("name", s.name);
        top.get("description", s.description);
        if (top.has("mesh")) mesh(top.child("mesh"), s.mesh);
        if (top.has("backend")) {
            const auto b = top.str("backend");
            if (b == "fv") s.backend = Backend::fv;
            else if (b == "fve") s.backend = Backend::fve;
            else throw top.error("backend", "unknown value '" + b + "' (expected fv or fve)");
        }
        if (top.has("flux")) flux(top.child("flux"), s.flux);
        if (top.has("source")) source(top.child("source"), s.source);
        if (top.has("initial")) initial(top.child("initial"), s.initial);
        if (top.has("scheme")) {
            double theta = 1.0;
            top.get("theta", theta);
            try {
                s.scheme = scheme_from_string(top.str("scheme"), theta);
                s.scheme.validate();
            } catch (const ParameterError& e) {
                throw top.error("scheme", e.what());
            }
        } else if (top.has("theta")) {
            throw top.error("theta", "needs \"scheme\": \"theta\"");
        }
        if (top.has("dt")) {
            const auto& v = top.at("dt");
            s.dt.clear();
            if (v.is_number()) s.dt.push_back(v.get<double>());
            else if (v.is_array()) {
                for (const auto& x : v) {
                    if (!x.is_number()) throw top.error("dt", "schedule entries must be numbers");
                    s.dt.push_back(x.get<double>());
                }
            } else throw top.error("dt", "expected a number or an array of numbers");
            if (s.dt.empty()) throw top.error("dt", "empty schedule");
            for (double d : s.dt)
                if (!(d > 0.0) || !std::isfinite(d)) throw top.error("dt", "time steps must be positive");
        }
        top.get("steps", s.steps);
        if (s.steps < 0) throw top.error("steps", "must be nonnegative");
        top.get("t0", s.t0);
        if (top.has("solver")) {
            auto o = top.child("solver");
            o.allow({"tol", "max_iter", "max_polish"});
            o.get("tol", s.solver.tol);
            o.get("max_iter", s.solver.max_iter);
            o.get("max_polish", s.solver.max_polish);
            if (!(s.solver.tol > 0.0)) throw o.error("tol", "must be positive");
            if (s.solver.max_iter < 1) throw o.error("max_iter", "must be at least 1");
            if (s.solver.max_polish < 0) throw o.error("max_polish", "must be nonnegative");
        }
        top.get("seed", s.seed);
        top.get("snapshot_every", s.snapshot_every);
        if (s.snapshot_every < 0) throw top.error("snapshot_every", "must be nonnegative");
        if (top.has("expect")) {
            const auto& v = top.at("expect");
            if (!v.is_array()) throw top.error("expect", "expected an array of tags");
            s.expect.clear();
            for (const auto& t : v) {
                if (!t.is_string()) throw top.error("expect", "tags must be strings");
                const auto tag = t.get<std::string>();
                if (!expectation_registry().count(tag)) throw top.error("expect", "unknown tag '" + tag + "'");
                s.expect.push_back(tag);
            }
        }
        top.get("output", cfg.output_dir);
        return cfg;
    }

private:
    struct Obj {
        ConfigReader* r;
        const json& j;
        std::string path;
        std::size_t pos;  ///< offset of this object's key in the text

        std::string full(const std::string& k) const { return path.empty() ? k : path + "." + k; }
        ConfigError error(const std::string& k, const std::string& what) const
        {
            return ConfigError(full(k), r->line_of(k, pos), what);
        }
        bool has(const std::string& k) const { return j.contains(k); }
        const json& at(const std::string& k) const { return j.at(k); }
        void allow(std::initializer_list<const char*> keys) const
        {
            for (auto it = j.begin(); it != j.end(); ++it) {
                bool ok = false;
                for (const char* k : keys) ok = ok || it.key() == k;
                if (!ok) throw error(it.key(), "unknown key");
            }
        }
        Obj child(const std::string& k) const
        {
            const auto& c = j.at(k);
            if (!c.is_object()) throw error(k, "expected an object");
            return {r, c, full(k), r->offset_of(k, pos)};
        }
        std::string str(const std::string& k) const
        {
            const auto& v = j.at(k);
            if (!v.is_string()) throw error(k, "expected a string");
            return v.get<std::string>();
        }
        void get(const std::string& k, std::string& out) const
        {
            if (has(k)) out = str(k);
        }
        void get(const std::string& k, double& out) const
        {
            if (!has(k)) return;
            const auto& v = j.at(k);
            if (!v.is_number()) throw error(k, "expected a number");
            out = v.get<double>();
            if (!std::isfinite(out)) throw error(k, "must be finite");
        }
        template <class I>
            requires std::is_integral_v<I>
        void get(const std::string& k, I& out) const
        {
            if (!has(k)) return;
            const auto& v = j.at(k);
            if (!v.is_number_integer()) throw error(k, "expected an integer");
            if constexpr (std::is_unsigned_v<I>) {
                if (v.get<long long>() < 0) throw error(k, "must be nonnegative");
            }
            out = v.get<I>();
        }
        void get(const std::string& k, Point& out) const
        {
            if (!has(k)) return;
            const auto& v = j.at(k);
            if (!v.is_array() || v.empty() || v.size() > 2) throw error(k, "expected an array of 1 or 2 numbers");
            out = {0.0, 0.0};
            for (std::size_t i = 0; i < v.size(); ++i) {
                if (!v[i].is_number()) throw error(k, "expected numbers");
                out[i] = v[i].get<double>();
            }
        }
        void range(const std::string& k, std::array<double, 2>& out) const
        {
            if (!has(k)) return;
            const auto& v = j.at(k);
            if (!v.is_array() || v.size() != 2 || !v[0].is_number() || !v[1].is_number())
                throw error(k, "expected [lo, hi]");
            out = {v[0].get<double>(), v[1].get<double>()};
            if (!(out[0] < out[1])) throw error(k, "needs lo < hi");
        }
        void one_of(const std::string& k, const std::string& v, std::initializer_list<const char*> ok) const
        {
            std::string list;
            for (const char* o : ok) {
                if (v == o) return;
                list += list.empty() ? o : std::string(", ") + o;
            }
            throw error(k, "unknown value '" + v + "' (expected " + list + ")");
        }
    };

    void mesh(const Obj& o, MeshSpec& m)
    {
        o.allow({"type", "a", "b", "n", "x", "y", "nx", "ny"});
        o.get("type", m.type);
        o.one_of("type", m.type, {"interval", "rect"});
        o.get("a", m.a);
        o.get("b", m.b);
        o.get("n", m.n);
        o.range("x", m.x);
        o.range("y", m.y);
        o.get("nx", m.nx);
        o.get("ny", m.ny);
        if (m.type == "interval") {
            if (!(m.a < m.b)) throw o.error("b", "needs a < b");
            if (m.n < 1) throw o.error("n", "must be at least 1");
        } else if (m.nx < 1 || m.ny < 1) {
            throw o.error(m.nx < 1 ? "nx" : "ny", "must be at least 1");
        }
    }

    void flux(const Obj& o, FluxSpec& f)
    {
        o.allow({"family", "k", "p", "r", "gamma", "eps", "delta", "velocity", "kernel"});
        o.get("family", f.family);
        o.one_of("family", f.family,
                 {"none", "p-laplacian", "doubly-nonlinear", "porous-medium", "advective", "nonlocal"});
        o.get("k", f.k);
        o.get("p", f.p);
        o.get("r", f.r);
        o.get("gamma", f.gamma);
        o.get("eps", f.eps);
        o.get("delta", f.delta);
        if (f.k < 0.0) throw o.error("k", "must be nonnegative");
        if (!(f.p > 1.0)) throw o.error("p", "must exceed 1");
        if (f.r < 0.0) throw o.error("r", "must be nonnegative");
        if (!(f.gamma >= 1.0)) throw o.error("gamma", "must be at least 1");
        if (f.eps < 0.0) throw o.error("eps", "must be nonnegative");
        if (!(f.delta > 0.0)) throw o.error("delta", "must be positive");
        if (o.has("velocity")) {
            auto v = o.child("velocity");
            v.allow({"type", "c", "vector", "center"});
            v.get("type", f.velocity.type);
            v.one_of("type", f.velocity.type, {"zero", "uniform", "converging", "rotation"});
            v.get("c", f.velocity.c);
            v.get("vector", f.velocity.vector);
            v.get("center", f.velocity.center);
        }
        if (o.has("kernel")) {
            auto k = o.child("kernel");
            k.allow({"type", "g", "local", "beta", "width", "g_file", "k_file"});
            k.get("type", f.kernel.type);
            k.one_of("type", f.kernel.type, {"gaussian", "matrix"});
            k.get("g", f.kernel.g);
            k.get("local", f.kernel.local);
            k.get("beta", f.kernel.beta);
            k.get("width", f.kernel.width);
            k.get("g_file", f.kernel.g_file);
            k.get("k_file", f.kernel.k_file);
            if (!(f.kernel.width > 0.0)) throw k.error("width", "must be positive");
            if (f.kernel.type == "matrix") {
                if (f.kernel.g_file.empty()) throw k.error("g_file", "required for matrix kernels");
                if (f.kernel.k_file.empty()) throw k.error("k_file", "required for matrix kernels");
                f.kernel.g_file = resolve(f.kernel.g_file);
                f.kernel.k_file = resolve(f.kernel.k_file);
            }
        }
    }

    void source(const Obj& o, SourceSpec& s)
    {
        o.allow({"type", "value", "a", "b", "x_end", "center"});
        o.get("type", s.type);
        o.one_of("type", s.type, {"zero", "constant", "linear", "step", "radial"});
        o.get("value", s.value);
        o.get("a", s.a);
        o.get("b", s.b);
        o.get("x_end", s.x_end);
        o.get("center", s.center);
    }

    void initial(const Obj& o, InitialSpec& s)
    {
        o.allow({"type", "value", "height", "radius", "x_end", "outside", "center"});
        o.get("type", s.type);
        o.one_of("type", s.type, {"constant", "cap", "step", "cosine", "random"});
        o.get("value", s.value);
        o.get("height", s.height);
        o.get("radius", s.radius);
        o.get("x_end", s.x_end);
        o.get("outside", s.outside);
        o.get("center", s.center);
        if (!(s.radius > 0.0)) throw o.error("radius", "must be positive");
    }

    std::string resolve(const std::string& p) const
    {
        std::filesystem::path q(p);
        if (q.is_relative() && !base_.empty()) q = base_ / q;
        return q.string();
    }

    std::size_t offset_of(const std::string& key, std::size_t from) const
    {
        const auto at = text_.find("\"" + key + "\"", from);
        return at == std::string::npos ? from : at;
    }

    int line_of(const std::string& key, std::size_t from) const
    {
        const auto at = text_.find("\"" + key + "\"", from);
        if (at == std::string::npos) return 0;
        return line_col(at).first;
    }

    std::pair<int, int> line_col(std::size_t byte) const
    {
        byte = std::min(byte, text_.size());
        int line = 1, col = 1;
        for (std::size_t i = 0; i < byte; ++i) {
            if (text_[i] == '\n') {
                ++line;
                col = 1;
            } else {
                ++col;
            }
        }
        return {line, col};
    }

    // drops nlohmann's "[json.exception...] parse error at line L, column C: " prefix
    static std::string strip(const std::string& what)
    {
        auto p = what.find(", column ");
        if (p != std::string::npos) p = what.find(": ", p);
        return p == std::string::npos ? what : what.substr(p + 2);
    }

    std::string text_;
    std::filesystem::path base_;
};

}  // namespace detail

inline RunConfig parse_config(const std::string& text, const std::filesystem::path& base_dir = {})
{
    return detail::ConfigReader(text, base_dir).read();
}

inline RunConfig load_config(const std::filesystem::path& path)
{
    std::ifstream in(path);
    if (!in) throw ConfigError("", 0, "cannot read '" + path.string() + "'");
    std::stringstream ss;
    ss << in.rdbuf();
    auto cfg = parse_config(ss.str(), path.parent_path());
    cfg.source_path = path.string();
    return cfg;
}

}  // namespace thinlayer
