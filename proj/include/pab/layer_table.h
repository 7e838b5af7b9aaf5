// Copyright 2026 The pab Authors.
//
// Licensed under the Apache License, Version 2.0 (the "License");
// you may not use this file except in compliance with the License.
// You may obtain a copy of the License at
//
//     http://www.apache.org/licenses/LICENSE-2.0
//
// Unless required by applicable law or agreed to in writing, software
// distributed under the License is distributed on an "AS IS" BASIS,
// WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
// See the License for the specific language governing permissions and
// limitations under the License.

#ifndef PAB_LAYER_TABLE_H_
#define PAB_LAYER_TABLE_H_

#include <span>
#include <vector>

namespace pab {

// Dense row-major (slot, level) table of doubles. Rows are slots 0..M-1,
// columns are grid levels 0..D-1.
class LayerTable {
 public:
  LayerTable() = default;
  LayerTable(int units, int grid_size, double fill = 0.0)
      : units_(units), grid_size_(grid_size),
        data_(static_cast<std::size_t>(units) * grid_size, fill) {}

  int units() const { return units_; }
  int grid_size() const { return grid_size_; }

  double& operator()(int slot, int level) {
    return data_[static_cast<std::size_t>(slot) * grid_size_ + level];
  }
  double operator()(int slot, int level) const {
    return data_[static_cast<std::size_t>(slot) * grid_size_ + level];
  }

  std::span<double> row(int slot) {
    return {data_.data() + static_cast<std::size_t>(slot) * grid_size_,
            static_cast<std::size_t>(grid_size_)};
  }
  std::span<const double> row(int slot) const {
    return {data_.data() + static_cast<std::size_t>(slot) * grid_size_,
            static_cast<std::size_t>(grid_size_)};
  }

  const std::vector<double>& data() const { return data_; }

  friend bool operator==(const LayerTable&, const LayerTable&) = default;

 private:
  int units_ = 0;
  int grid_size_ = 0;
  std::vector<double> data_;
};

}  // namespace pab

#endif  // PAB_LAYER_TABLE_H_
