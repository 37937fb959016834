#pragma once

#include <array>
#include <cmath>
#include <string>
#include <vector>

#include "json.hpp"
#include "olrl/core.hpp"

namespace olrl {

enum class Task { gather, avoid };

enum class Action { noop = 0, pos_x = 1, neg_x = 2, pos_y = 3, neg_y = 4 };
inline constexpr int kNumActions = 5;

inline const char* task_name(Task t) { return t == Task::gather ? "gather" : "avoid"; }

struct EnvConfig {
    Task task = Task::gather;
    bool randomize = false;
    int n_targets = 2;
    double agent_speed = 0.1;
    double target_speed = 0.2;      // 0.05 when task = avoid
    double radius_min = 0.05;
    double radius_max = 0.1;
    double contact_reward = 1.0;    // -1 when task = avoid
    int episode_len = 500;
    int render_h = 64;
    int render_w = 64;
    uint64_t seed = 0;
    double noise_std = 0.0;

    static EnvConfig for_task(Task t) {
        EnvConfig c;
        c.task = t;
        if (t == Task::avoid) {
            c.target_speed = 0.05;
            c.contact_reward = -1.0;
        }
        return c;
    }

    void validate() const {
        if (n_targets < 1) throw ConfigError("n_targets must be >= 1");
        if (agent_speed <= 0.0 || target_speed <= 0.0)
            throw ConfigError("speeds must be > 0");
        if (!(radius_min > 0.0 && radius_min <= radius_max && radius_max < 0.25))
            throw ConfigError("radius_range must lie within (0, 0.25)");
        if (render_h < 16 || render_w < 16) throw ConfigError("render dims must be >= 16");
        if (episode_len < 1) throw ConfigError("episode_len must be >= 1");
        if (noise_std < 0.0) throw ConfigError("noise_std must be >= 0");
    }
};

inline EnvConfig env_config_from_json(const nlohmann::json& j) {
    if (!j.is_object()) throw ConfigError("env config must be a JSON object");
    Task task = Task::gather;
    if (j.contains("task")) {
        std::string t = j.at("task").get<std::string>();
        if (t == "gather")
            task = Task::gather;
        else if (t == "avoid")
            task = Task::avoid;
        else
            throw ConfigError("unknown task: " + t);
    }
    EnvConfig c = EnvConfig::for_task(task);
    for (auto it = j.begin(); it != j.end(); ++it) {
        const std::string& k = it.key();
        const nlohmann::json& v = it.value();
        try {
            if (k == "task") {
                // handled above
            } else if (k == "randomize") {
                c.randomize = v.get<bool>();
            } else if (k == "n_targets") {
                c.n_targets = v.get<int>();
            } else if (k == "agent_speed") {
                c.agent_speed = v.get<double>();
            } else if (k == "target_speed") {
                c.target_speed = v.get<double>();
            } else if (k == "radius_range") {
                if (!v.is_array() || v.size() != 2)
                    throw ConfigError("radius_range must be [lo, hi]");
                c.radius_min = v[0].get<double>();
                c.radius_max = v[1].get<double>();
            } else if (k == "contact_reward") {
                c.contact_reward = v.get<double>();
            } else if (k == "episode_len") {
                c.episode_len = v.get<int>();
            } else if (k == "render_h") {
                c.render_h = v.get<int>();
            } else if (k == "render_w") {
                c.render_w = v.get<int>();
            } else if (k == "seed") {
                c.seed = v.get<uint64_t>();
            } else if (k == "noise_std") {
                c.noise_std = v.get<double>();
            } else {
                throw ConfigError("unknown env config key: " + k);
            }
        } catch (const nlohmann::json::exception& e) {
            throw ConfigError("bad value for env config key '" + k + "': " + e.what());
        }
    }
    c.validate();
    return c;
}

inline nlohmann::json env_config_to_json(const EnvConfig& c) {
    return nlohmann::json{{"task", task_name(c.task)},
                          {"randomize", c.randomize},
                          {"n_targets", c.n_targets},
                          {"agent_speed", c.agent_speed},
                          {"target_speed", c.target_speed},
                          {"radius_range", {c.radius_min, c.radius_max}},
                          {"contact_reward", c.contact_reward},
                          {"episode_len", c.episode_len},
                          {"render_h", c.render_h},
                          {"render_w", c.render_w},
                          {"seed", c.seed},
                          {"noise_std", c.noise_std}};
}

struct Body {
    Vec2 center;                       // arena units, [0,1]^2
    Vec2 heading;                      // unit direction; targets only
    double radius = 0.05;
    std::array<float, 3> color{};     // RGB, continuous in [0,255]
};

// Body 0 is the agent; the rest are targets. Plain data so tests can craft
// states directly.
struct EnvState {
    std::vector<Body> bodies;
    int step = 0;
    bool done = false;
    uint64_t noise_seed = 0;
    Rng rng{0};
};

// H x W x 4 float image. Channels 0..2 are RGB in [0,255], channel 3 is
// depth in [0,1] (1.0 = table plane).
struct Frame {
    int h = 0;
    int w = 0;
    std::vector<float> data;

    Frame() = default;
    Frame(int height, int width) : h(height), w(width), data(size_t(height) * width * 4, 0.f) {}

    float at(int x, int y, int c) const { return data[(size_t(y) * w + x) * 4 + c]; }
    float& at(int x, int y, int c) { return data[(size_t(y) * w + x) * 4 + c]; }

    bool operator==(const Frame&) const = default;
};

inline constexpr std::array<float, 3> kTableColor = {46.f, 46.f, 52.f};

namespace detail {

inline bool bodies_overlap(const Body& a, const Body& b) {
    return (a.center - b.center).norm() < a.radius + b.radius;
}

// Target headings are restricted to the four axis directions. Together with
// speeds that are whole multiples of a pixel this makes every body's raster
// mask translate rigidly from frame to frame, so point-cloud medians move by
// exact integers and learned velocity distributions can sharpen to point
// masses instead of absorbing sub-pixel jitter.
inline Vec2 sample_axis_heading(Rng& rng) {
    static constexpr std::array<Vec2, 4> kAxes = {
        Vec2{1.0, 0.0}, Vec2{-1.0, 0.0}, Vec2{0.0, 1.0}, Vec2{0.0, -1.0}};
    return kAxes[size_t(rng.uniform_int(4))];
}

inline Vec2 sample_free_center(const std::vector<Body>& placed, double radius, Rng& rng) {
    for (int attempt = 0; attempt < 1000; ++attempt) {
        Vec2 c{rng.uniform(), rng.uniform()};
        bool ok = true;
        for (const Body& b : placed) {
            if ((c - b.center).norm() < radius + b.radius) {
                ok = false;
                break;
            }
        }
        if (ok) return c;
    }
    throw ConfigError("could not place body without overlap after 1000 attempts");
}

}  // namespace detail

// Top-down raster of the arena. Bodies are hemispheres seen from above: a
// pixel at distance rho <= R from a body center gets depth
// 1 - sqrt(R^2 - rho^2)/R * 0.5; nearest depth wins where bodies overlap.
inline Frame render(const EnvState& state, const EnvConfig& cfg) {
    Frame f(cfg.render_h, cfg.render_w);
    for (int y = 0; y < cfg.render_h; ++y) {
        for (int x = 0; x < cfg.render_w; ++x) {
            double px = (x + 0.5) / cfg.render_w;
            double py = (y + 0.5) / cfg.render_h;
            float depth = 1.0f;
            const std::array<float, 3>* color = &kTableColor;
            for (const Body& b : state.bodies) {
                double rho2 = sqr(px - b.center.x) + sqr(py - b.center.y);
                double r2 = sqr(b.radius);
                if (rho2 > r2) continue;
                float d = float(1.0 - std::sqrt(r2 - rho2) / b.radius * 0.5);
                if (d < depth) {
                    depth = d;
                    color = &b.color;
                }
            }
            f.at(x, y, 0) = (*color)[0];
            f.at(x, y, 1) = (*color)[1];
            f.at(x, y, 2) = (*color)[2];
            f.at(x, y, 3) = depth;
        }
    }
    if (cfg.noise_std > 0.0) {
        Rng noise(mix_seed({state.noise_seed, uint64_t(state.step)}));
        for (int y = 0; y < cfg.render_h; ++y) {
            for (int x = 0; x < cfg.render_w; ++x) {
                for (int c = 0; c < 3; ++c) {
                    float v = f.at(x, y, c) + float(noise.normal(0.0, cfg.noise_std));
                    f.at(x, y, c) = std::clamp(v, 0.f, 255.f);
                }
                // Depth lives on a [0,1] scale; noise_std is in RGB units.
                float d = f.at(x, y, 3) + float(noise.normal(0.0, cfg.noise_std / 255.0));
                f.at(x, y, 3) = std::clamp(d, 0.f, 1.f);
            }
        }
    }
    return f;
}

// Ground-truth winner per pixel: body index, or -1 for the table. Mirrors
// render()'s z-buffer exactly; used by tests and purity audits.
inline std::vector<int> render_labels(const EnvState& state, const EnvConfig& cfg) {
    std::vector<int> out(size_t(cfg.render_h) * cfg.render_w, -1);
    for (int y = 0; y < cfg.render_h; ++y) {
        for (int x = 0; x < cfg.render_w; ++x) {
            double px = (x + 0.5) / cfg.render_w;
            double py = (y + 0.5) / cfg.render_h;
            float depth = 1.0f;
            int who = -1;
            for (size_t i = 0; i < state.bodies.size(); ++i) {
                const Body& b = state.bodies[i];
                double rho2 = sqr(px - b.center.x) + sqr(py - b.center.y);
                double r2 = sqr(b.radius);
                if (rho2 > r2) continue;
                float d = float(1.0 - std::sqrt(r2 - rho2) / b.radius * 0.5);
                if (d < depth) {
                    depth = d;
                    who = int(i);
                }
            }
            out[size_t(y) * cfg.render_w + x] = who;
        }
    }
    return out;
}

struct StepResult {
    Frame frame;
    double reward = 0.0;
    bool done = false;
};

namespace detail {

inline void reflect(double& pos, double& dir) {
    while (pos < 0.0 || pos > 1.0) {
        if (pos < 0.0) {
            pos = -pos;
            dir = -dir;
        } else {
            pos = 2.0 - pos;
            dir = -dir;
        }
    }
}

}  // namespace detail

// Advances a state by one action: agent moves along the action axis (clamped
// to the arena), targets advance along their headings reflecting off walls,
// contacts score, and in gather contacted targets respawn.
inline StepResult step_state(EnvState& state, Action action, const EnvConfig& cfg) {
    if (state.done) throw UsageError("step on a terminated episode");
    if (state.bodies.empty()) throw UsageError("step before reset");
    Body& agent = state.bodies[0];
    switch (action) {
        case Action::noop: break;
        case Action::pos_x: agent.center.x += cfg.agent_speed; break;
        case Action::neg_x: agent.center.x -= cfg.agent_speed; break;
        case Action::pos_y: agent.center.y += cfg.agent_speed; break;
        case Action::neg_y: agent.center.y -= cfg.agent_speed; break;
    }
    agent.center.x = std::clamp(agent.center.x, 0.0, 1.0);
    agent.center.y = std::clamp(agent.center.y, 0.0, 1.0);

    for (size_t i = 1; i < state.bodies.size(); ++i) {
        Body& t = state.bodies[i];
        t.center += t.heading * cfg.target_speed;
        detail::reflect(t.center.x, t.heading.x);
        detail::reflect(t.center.y, t.heading.y);
    }

    double reward = 0.0;
    for (size_t i = 1; i < state.bodies.size(); ++i) {
        Body& t = state.bodies[i];
        if (!detail::bodies_overlap(state.bodies[0], t)) continue;
        reward += cfg.contact_reward;
        if (cfg.task == Task::gather) {
            std::vector<Body> others;
            for (size_t k = 0; k < state.bodies.size(); ++k) {
                if (k != i) others.push_back(state.bodies[k]);
            }
            t.center = detail::sample_free_center(others, t.radius, state.rng);
            t.heading = detail::sample_axis_heading(state.rng);
        }
    }

    state.step += 1;
    state.done = state.step >= cfg.episode_len;
    return {render(state, cfg), reward, state.done};
}

class Environment {
  public:
    explicit Environment(EnvConfig cfg) : cfg_(cfg) {
        cfg_.validate();
        Rng appearance(mix_seed({cfg_.seed, 1}));
        fixed_colors_.resize(size_t(cfg_.n_targets) + 1);
        fixed_radii_.resize(size_t(cfg_.n_targets) + 1);
        for (size_t i = 0; i < fixed_colors_.size(); ++i) {
            for (int c = 0; c < 3; ++c) fixed_colors_[i][c] = float(appearance.uniform(0.0, 255.0));
            fixed_radii_[i] = appearance.uniform(cfg_.radius_min, cfg_.radius_max);
        }
    }

    const EnvConfig& config() const { return cfg_; }
    const EnvState& state() const { return state_; }

    Frame reset(uint64_t episode_seed) {
        state_ = EnvState{};
        state_.rng = Rng(mix_seed({cfg_.seed, episode_seed, 2}));
        int n = cfg_.n_targets + 1;
        state_.bodies.resize(size_t(n));
        for (int i = 0; i < n; ++i) {
            Body& b = state_.bodies[size_t(i)];
            if (cfg_.randomize) {
                for (int c = 0; c < 3; ++c) b.color[c] = float(state_.rng.uniform(0.0, 255.0));
                b.radius = state_.rng.uniform(cfg_.radius_min, cfg_.radius_max);
            } else {
                b.color = fixed_colors_[size_t(i)];
                b.radius = fixed_radii_[size_t(i)];
            }
        }
        for (int i = 0; i < n; ++i) {
            Body& b = state_.bodies[size_t(i)];
            std::vector<Body> placed(state_.bodies.begin(), state_.bodies.begin() + i);
            b.center = detail::sample_free_center(placed, b.radius, state_.rng);
            if (i > 0) b.heading = detail::sample_axis_heading(state_.rng);
        }
        state_.noise_seed = state_.rng.next_u64();
        return render(state_, cfg_);
    }

    StepResult step(Action action) { return step_state(state_, action, cfg_); }

    Frame render_now() const { return render(state_, cfg_); }
    std::vector<int> labels_now() const { return render_labels(state_, cfg_); }

  private:
    EnvConfig cfg_;
    std::vector<std::array<float, 3>> fixed_colors_;
    std::vector<double> fixed_radii_;
    EnvState state_;
};

}  // namespace olrl
