/* Runs a short hybrid-encoded session through the C API and prints the QBER. */
#include <stdio.h>
#include <stdlib.h>

#include "hybrid_qkd.h"

static int check(HqStatus status, const char *what) {
    if (status == HQ_STATUS_OK) {
        return 0;
    }
    char msg[256];
    hq_last_error_message(msg, sizeof msg);
    fprintf(stderr, "%s failed (%d): %s\n", what, (int)status, msg);
    return 1;
}

int main(void) {
    HqConfig *config = hq_config_new();
    HqSession *session = NULL;
    HqQberReport report;
    HqSessionStats stats;
    double fraction = 0.0;
    int rc = 1;

    if (check(hq_config_set_rounds(config, 200000), "set_rounds")
        || check(hq_config_set_encoding(config, HQ_ENCODING_HYBRID), "set_encoding")
        || check(hq_config_set_theta(config, 0.7), "set_theta")
        || check(hq_config_set_source(config, hq_source_params_ideal()), "set_source")
        || check(hq_config_set_depolarizing(config, 0.0808), "set_depolarizing")
        || check(hq_session_run(config, &session), "session_run")
        || check(hq_session_estimate_qber(session, 0.5, 1, &report), "estimate_qber")
        || check(hq_session_stats(session, &stats), "session_stats")) {
        goto done;
    }

    if (check(hq_secret_key_fraction(report.qber, &fraction), "secret_key_fraction")) {
        goto done;
    }
    printf("hybrid-qkd %s\n", hq_version());
    printf("detected %llu of %llu rounds\n", (unsigned long long)stats.detected, (unsigned long long)stats.rounds);
    printf("qber %.4f +/- %.4f, key fraction %.4f, %llu bits kept\n", report.qber, report.std_error, fraction,
           (unsigned long long)stats.key_length);
    rc = 0;

done:
    hq_session_free(session);
    hq_config_free(config);
    return rc;
}
