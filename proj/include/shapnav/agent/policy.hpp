#pragma once

#include <array>
#include <filesystem>

#include "shapnav/nncore/architectures.hpp"
#include "shapnav/nncore/checkpoint.hpp"
#include "shapnav/nncore/network.hpp"
#include "shapnav/nncore/spec_io.hpp"
#include "shapnav/simenv/types.hpp"

namespace shapnav::agent {

inline nn::NetworkSpec make_actor_spec(const nn::ArchitectureConfig& arch, const sim::ActionLimits& lim) {
  auto s = lim.scale(), o = lim.offset();
  return nn::actor_spec(arch, 6, {s.begin(), s.end()}, {o.begin(), o.end()});
}

inline nn::Tensor state_tensor(const std::array<float, 6>& s) { return nn::Tensor({6}, {s.begin(), s.end()}); }

// Deterministic actor: observation -> physical command.
struct Policy {
  nn::NetworkSpec spec;
  nn::ParamStore params;
  sim::ActionLimits limits;

  sim::ActionCommand act(const sim::Observation& obs) const {
    auto r = nn::forward(spec, params, obs.depth, state_tensor(obs.state));
    return limits.clamp({r.outputs[0], r.outputs[1], r.outputs[2]});
  }
};

// Actor checkpoint layout inside a directory: actor.spec, actor.ckpt(.bin).
inline void save_policy(const Policy& p, const std::filesystem::path& dir) {
  std::filesystem::create_directories(dir);
  nn::save_spec(p.spec, dir / "actor.spec");
  nn::save_params(p.params, dir / "actor.ckpt");
}

inline Policy load_policy(const std::filesystem::path& dir, const sim::ActionLimits& lim) {
  if (!std::filesystem::exists(dir / "actor.spec"))
    throw IoError("no actor checkpoint in " + dir.string());
  Policy p;
  p.spec = nn::load_spec(dir / "actor.spec");
  p.params = nn::load_params(p.spec, dir / "actor.ckpt");
  p.limits = lim;
  if (p.spec.output_width != 3 || p.spec.state_width != 6)
    throw ConfigError("checkpoint in " + dir.string() + " is not a 6-state, 3-action policy");
  return p;
}

}  // namespace shapnav::agent
