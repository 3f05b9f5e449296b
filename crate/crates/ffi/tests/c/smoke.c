#include <math.h>
#include <stdio.h>
#include <stdlib.h>

#include "rtsolve.h"

int main(void) {
    RtsSimulation *sim = NULL;
    if (rts_simulation_from_preset("example1", 0.01, &sim) != RTS_STATUS_OK) return 10;
    if (rts_simulation_advance(sim, 0.02) != RTS_STATUS_OK) return 11;
    size_t n = rts_simulation_cell_count(sim);
    double *rho = malloc(n * sizeof(double));
    if (rts_simulation_density(sim, rho, n) != RTS_STATUS_OK) return 12;
    double mass = 0.0;
    for (size_t i = 0; i < n; i++) mass += rho[i];
    RtsSolveReport report;
    if (rts_simulation_last_report(sim, &report) != RTS_STATUS_OK || !report.converged) return 13;
    printf("%s %zu %.17g %g\n", rts_version(), n, mass, rts_simulation_time(sim));
    free(rho);
    rts_simulation_free(sim);

    RtsSimulation *bad = NULL;
    if (rts_simulation_from_preset("nope", NAN, &bad) != RTS_STATUS_CONFIG_ERROR || bad) return 14;
    char msg[256];
    rts_last_error_message(msg, sizeof msg);
    printf("%s\n", msg);
    return 0;
}
