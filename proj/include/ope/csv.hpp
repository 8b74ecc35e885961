#pragma once

#include <memory>
#include <span>
#include <string>

#include "ope/environments.hpp"
#include "ope/types.hpp"

namespace ope {

// Shortest decimal form that parses back to exactly the same double.
std::string format_double(double v);

// Header `x1,...,xd,label`; labels 1..K with K taken as the largest label.
void save_table_csv(const ClassificationTable& table, const std::string& path);
ClassificationTable load_table_csv(const std::string& path);

// Dataset directory: logged.csv (`t,x1,...,xd,a,y,g_logged`), cross.csv
// (`t,s,g_t_at_s`, all pairs s <= t), meta.json (arm count and shape).
// Loading returns the matrix-backed form; snapshots do not survive the wire.
void save_dataset(const LoggedDataset& ds, const std::string& dir);
LoggedDataset load_dataset(const std::string& dir);

// Context-free target weights, header `arm,weight`, one row per arm. The
// kind is recovered from the weights: any negative value means a contrast,
// nonnegative weights summing to 1 mean a policy, anything else a subgroup.
void save_target_csv(std::span<const double> weights, const std::string& path);
std::shared_ptr<const TargetFunctional> load_target_csv(const std::string& path);

}  // namespace ope
