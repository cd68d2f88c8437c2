#include <stdio.h>
#include <stdlib.h>

#include "gsr.h"

int main(void) {
    double xi = 0.0;
    if (gsr_xi(0.5, &xi) != GSR_STATUS_OK) {
        return 1;
    }
    if (gsr_xi(0.0, &xi) != GSR_STATUS_DOMAIN || gsr_last_error_message() == NULL) {
        return 2;
    }

    GsrReport *report = NULL;
    if (gsr_report_evaluate(1.0, 3.05, 57.31, 256, &report) != GSR_STATUS_OK) {
        fprintf(stderr, "%s\n", gsr_last_error_message());
        return 3;
    }
    GsrSummary s;
    gsr_report_summary(report, &s);
    size_t n = gsr_report_profile_len(report);
    double *add = malloc(n * sizeof(double));
    size_t written = 0;
    gsr_report_profile(report, add, NULL, n, &written);
    gsr_report_free(report);

    printf("xi=%.6f arl=%.3f sadd=%.3f lower_bound=%.3f profile=%zu add0=%.3f\n",
           xi, s.arl, s.sadd, s.lower_bound, written, add[0]);
    free(add);
    return s.lower_bound <= s.sadd ? 0 : 4;
}
