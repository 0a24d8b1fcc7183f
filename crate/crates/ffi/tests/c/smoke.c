#include <stdio.h>
#include "dirquant.h"

int main(void) {
    const double theta[3] = {0.0, 0.0, 1.0};
    DqSample *s = NULL;
    DqTransport *t = NULL;
    double cost = -1.0;
    size_t ranks[21];

    if (dq_sample_vmf(21, theta, 3, 4.0, 1, &s) != DQ_STATUS_OK) return 1;
    if (dq_transport_fit(s, 4, 5, 1, 0, &t) != DQ_STATUS_OK) return 2;
    if (dq_transport_total_cost(t, &cost) != DQ_STATUS_OK || cost <= 0.0) return 3;
    if (dq_transport_ranks(t, ranks, 21) != DQ_STATUS_OK) return 4;
    if (dq_transport_ranks(t, ranks, 3) != DQ_STATUS_BUFFER_TOO_SMALL) return 5;
    if (dq_last_error() == NULL) return 6;
    if (dq_transport_fit(s, 4, 4, 1, 0, &t) != DQ_STATUS_FACTORIZATION) return 7;
    printf("%s\n", dq_last_error());
    dq_transport_free(t);
    dq_sample_free(s);
    return 0;
}
