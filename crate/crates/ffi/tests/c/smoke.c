#include <math.h>
#include <stdio.h>

#include "qfi_imaging.h"

#define CHECK(call)                                                              \
  do {                                                                           \
    QfiStatus st_ = (call);                                                      \
    if (st_ != QFI_STATUS_OK) {                                                  \
      fprintf(stderr, "%s -> %d: %s\n", #call, (int)st_, qfi_last_error_message()); \
      return 1;                                                                  \
    }                                                                            \
  } while (0)

int main(void) {
  QfiScenario *s = NULL;
  QfiInterferometer *r = NULL;
  double q = 0, f = 0, re[4], im[4];
  size_t dim = 0;

  CHECK(qfi_scenario_bundled("two_collector", &s));
  CHECK(qfi_qfi(s, NULL, &q));
  CHECK(qfi_interferometer_design(s, "separation-x", &r));
  CHECK(qfi_interferometer_dim(r, &dim));
  CHECK(qfi_interferometer_matrix(r, re, im, 4));
  CHECK(qfi_cfi(s, r, NULL, &f));

  if (dim != 2 || fabs(q - 0.0025) > 1e-12 || fabs(f / q - 1.0) > 1e-6) {
    fprintf(stderr, "unexpected values dim=%zu qfi=%g cfi=%g\n", dim, q, f);
    return 1;
  }
  for (int i = 0; i < 4; i++) {
    if (fabs(hypot(re[i], im[i]) - sqrt(0.5)) > 1e-9) return 1;
  }
  if (qfi_scenario_bundled("missing", &s) != QFI_STATUS_VALIDATION) return 1;

  qfi_interferometer_free(r);
  qfi_scenario_free(s);
  printf("qfi=%.6g cfi=%.6g version=%s\n", q, f, qfi_version());
  return 0;
}
