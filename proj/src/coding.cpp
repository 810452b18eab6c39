#include "midway/coding.hpp"

#include <string>

#include "midway/error.hpp"

namespace midway {

void GcsAssessment::validate() const {
  auto check = [](int v, int hi, const char* what) {
    if (v < 1 || v > hi) {
      throw Error(ErrorKind::InvalidArgument, std::string("GCS ") + what + " score " +
                                                  std::to_string(v) + " outside 1.." +
                                                  std::to_string(hi));
    }
  };
  check(eye, 4, "eye");
  check(verbal, 5, "verbal");
  check(motor, 6, "motor");
}

WfnsGrade wfns_from_gcs(const GcsAssessment& gcs, bool focal_deficit, bool pupils_reactive) {
  gcs.validate();
  return wfns_from_gcs_total(gcs.total(), focal_deficit, pupils_reactive);
}

WfnsGrade wfns_from_gcs_total(int total, bool focal_deficit, bool pupils_reactive) {
  if (total < 3 || total > 15) {
    throw Error(ErrorKind::InvalidArgument,
                "GCS total " + std::to_string(total) + " outside 3..15");
  }
  if (total == 15) return {1};
  if (total >= 13) return {focal_deficit ? 2 : 3};
  if (total >= 7) return {4};
  return {pupils_reactive ? 5 : 6};
}

GosCategory gos_from_int(int code) {
  if (code < 1 || code > 5) {
    throw Error(ErrorKind::InvalidArgument, "GOS category " + std::to_string(code) +
                                                " outside 1..5");
  }
  return static_cast<GosCategory>(code);
}

std::string_view gos_label(GosCategory c) {
  switch (c) {
    case GosCategory::GoodRecovery: return "Good Recovery";
    case GosCategory::ModerateDisability: return "Moderate Disability";
    case GosCategory::SevereDisability: return "Severe Disability";
    case GosCategory::VegetativeState: return "Persistent Vegetative State";
    case GosCategory::Death: return "Death";
  }
  return "?";
}

}  // namespace midway
