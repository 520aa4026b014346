#pragma once

#include <cmath>
#include <filesystem>
#include <fstream>
#include <sstream>
#include <string>

#include "shapnav/error.hpp"
#include "shapnav/format.hpp"
#include "shapnav/nncore/tensor.hpp"
#include "shapnav/simenv/types.hpp"

namespace shapnav::sim {

// Episode log columns, one row per step.
inline constexpr const char* kEpisodeCsvHeader =
    "time,d_xy,d_z,angle_error,v_xy,v_z,yaw_rate,cmd_v_xy,cmd_v_z,cmd_yaw_rate,"
    "r_goal,c_obs,c_act,c_pos,p_state,reward,terminal";

inline std::string episode_csv_row(double time, const StateFeatures& f, const ActionCommand& a,
                                   const RewardBreakdown& r, TerminalKind k) {
  std::ostringstream s;
  s << fmt_num(time);
  for (double v : f.as_array()) s << "," << fmt_num(v);
  for (double v : a.as_array()) s << "," << fmt_num(v);
  s << "," << fmt_num(r.r_goal) << "," << fmt_num(r.c_obs) << "," << fmt_num(r.c_act) << "," << fmt_num(r.c_pos)
    << "," << fmt_num(r.p_state) << "," << fmt_num(r.reward) << "," << terminal_name(k);
  return s.str();
}

// Binary 8-bit PGM (P5) of a (1, H, W) depth image in [0, 1].
inline std::string pgm_bytes(const nn::Tensor& depth) {
  if (depth.rank() != 3 || depth.dim(0) != 1) throw ConfigError("PGM export expects a (1, H, W) depth image");
  const int h = depth.dim(1), w = depth.dim(2);
  std::string s = "P5\n" + std::to_string(w) + " " + std::to_string(h) + "\n255\n";
  for (std::size_t i = 0; i < depth.size(); ++i) {
    double v = std::min(1.0, std::max(0.0, static_cast<double>(depth[i])));
    s.push_back(static_cast<char>(static_cast<unsigned char>(std::lround(255.0 * v))));
  }
  return s;
}

inline void write_pgm(const nn::Tensor& depth, const std::filesystem::path& path) {
  std::string b = pgm_bytes(depth);
  std::ofstream f(path, std::ios::binary);
  if (!f) throw IoError("cannot write " + path.string());
  f.write(b.data(), static_cast<std::streamsize>(b.size()));
  if (!f) throw IoError("write failed: " + path.string());
}

}  // namespace shapnav::sim
