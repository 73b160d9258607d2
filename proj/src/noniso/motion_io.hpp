#pragma once

#include "noniso/motion.hpp"

#include <iosfwd>
#include <string>

namespace noniso {

// Motion binary format ("NIMO"): magic, version u32, F u32, J u32, D u32
// (always 3), frame_rate f32, payload f32 little-endian row-major in
// (frame, joint, coord) order.
void write_motion(std::ostream& out, const Motion& m);
Motion read_motion(std::istream& in);
void save_motion(const std::string& path, const Motion& m);
Motion load_motion(const std::string& path);

// Prediction-set format ("NIPR"): magic, N u32, then N motion blocks, each
// a complete NIMO record.
void save_prediction_set(const std::string& path, const PredictionSet& preds);
PredictionSet load_prediction_set(const std::string& path);

// CSV inspection format: header frame,joint,x,y,z.
void write_motion_csv(std::ostream& out, const Motion& m);
Motion read_motion_csv(std::istream& in, double frame_rate = 24.0);

} // namespace noniso
