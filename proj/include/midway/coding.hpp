#pragma once

#include <string_view>

namespace midway {

struct GcsAssessment {
  int eye = 4;     // 1..4
  int verbal = 5;  // 1..5
  int motor = 6;   // 1..6

  // Throws InvalidArgument when a component is out of range.
  void validate() const;
  int total() const { return eye + verbal + motor; }
};

struct WfnsGrade {
  int grade = 1;  // 1..6; 6 = GCS 3-6 with unreactive pupils
  double as_continuous() const { return grade; }
};

WfnsGrade wfns_from_gcs(const GcsAssessment& gcs, bool focal_deficit, bool pupils_reactive);

// Same mapping from a total score in [3, 15].
WfnsGrade wfns_from_gcs_total(int total, bool focal_deficit, bool pupils_reactive);

enum class GosCategory {
  GoodRecovery = 1,
  ModerateDisability = 2,
  SevereDisability = 3,
  VegetativeState = 4,
  Death = 5,
};

GosCategory gos_from_int(int code);
std::string_view gos_label(GosCategory c);

}  // namespace midway
