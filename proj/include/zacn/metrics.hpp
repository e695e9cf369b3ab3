// Copyright 2026 The zacn Authors.
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

#pragma once

#include <cstddef>
#include <cstdint>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "zacn/errors.hpp"

namespace zacn {

using Label = std::int32_t;

/// Segmentation scores. Per-class entries are nullopt for classes that do
/// not occur in the ground truth; those classes are left out of the means.
struct MetricsReport {
  double acc = 0.0;
  double m_acc = 0.0;
  double m_iou = 0.0;
  double fw_iou = 0.0;
  std::vector<std::optional<double>> class_acc;
  std::vector<std::optional<double>> class_iou;
};

/// counts[i][j]: pixels with truth i predicted as j.
class ConfusionMatrix {
 public:
  explicit ConfusionMatrix(std::size_t num_classes) : n_(num_classes), counts_(num_classes * num_classes, 0) {
    if (num_classes == 0) throw DomainError("confusion matrix needs at least one class");
  }

  std::size_t num_classes() const { return n_; }
  std::uint64_t operator()(std::size_t truth, std::size_t pred) const { return counts_[truth * n_ + pred]; }

  void add(std::span<const Label> pred, std::span<const Label> truth) {
    if (pred.size() != truth.size()) {
      throw DomainError("prediction has " + std::to_string(pred.size()) + " labels, ground truth has " +
                        std::to_string(truth.size()));
    }
    for (std::size_t k = 0; k < pred.size(); ++k) {
      check_label(pred[k], "prediction");
      check_label(truth[k], "ground truth");
    }
    for (std::size_t k = 0; k < pred.size(); ++k) {
      ++counts_[static_cast<std::size_t>(truth[k]) * n_ + static_cast<std::size_t>(pred[k])];
    }
  }

  MetricsReport report() const {
    MetricsReport r;
    r.class_acc.assign(n_, std::nullopt);
    r.class_iou.assign(n_, std::nullopt);
    std::uint64_t total = 0;
    std::uint64_t correct = 0;
    std::vector<std::uint64_t> truth_count(n_, 0);
    std::vector<std::uint64_t> pred_count(n_, 0);
    for (std::size_t i = 0; i < n_; ++i) {
      for (std::size_t j = 0; j < n_; ++j) {
        truth_count[i] += (*this)(i, j);
        pred_count[j] += (*this)(i, j);
      }
      correct += (*this)(i, i);
    }
    for (auto s : truth_count) total += s;
    if (total == 0) return r;

    std::size_t present = 0;
    double acc_sum = 0.0;
    double iou_sum = 0.0;
    double fw_sum = 0.0;
    for (std::size_t i = 0; i < n_; ++i) {
      if (truth_count[i] == 0) continue;
      ++present;
      const double nii = static_cast<double>((*this)(i, i));
      const double si = static_cast<double>(truth_count[i]);
      const double uni = si + static_cast<double>(pred_count[i]) - nii;
      const double ca = nii / si;
      const double iou = nii / uni;
      r.class_acc[i] = ca;
      r.class_iou[i] = iou;
      acc_sum += ca;
      iou_sum += iou;
      fw_sum += si * iou;
    }
    r.acc = static_cast<double>(correct) / static_cast<double>(total);
    r.m_acc = acc_sum / static_cast<double>(present);
    r.m_iou = iou_sum / static_cast<double>(present);
    r.fw_iou = fw_sum / static_cast<double>(total);
    return r;
  }

 private:
  void check_label(Label l, const char* what) const {
    if (l < 0 || static_cast<std::size_t>(l) >= n_) {
      throw DomainError(std::string(what) + " label " + std::to_string(l) + " is outside [0, " +
                        std::to_string(n_) + ")");
    }
  }

  std::size_t n_;
  std::vector<std::uint64_t> counts_;
};

/// Acc, mAcc, mIoU and fwIoU of one predicted class map against the truth.
inline MetricsReport evaluate(std::span<const Label> pred, std::span<const Label> truth, std::size_t num_classes) {
  ConfusionMatrix cm(num_classes);
  cm.add(pred, truth);
  return cm.report();
}

}  // namespace zacn
