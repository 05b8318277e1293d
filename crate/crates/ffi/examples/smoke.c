#include <stdio.h>
#include "scd.h"

int main(int argc, char **argv) {
    if (argc < 2) {
        fprintf(stderr, "usage: %s INSTANCE.json\n", argv[0]);
        return 3;
    }
    ScdInstance *inst = NULL;
    ScdStatus st = scd_instance_load(argv[1], &inst);
    if (st != SCD_STATUS_OK) {
        fprintf(stderr, "load: %s\n", scd_last_error_message());
        return st;
    }
    ScdTrace *trace = NULL;
    st = scd_run(inst, "onf", 1e-3, 0, &trace);
    if (st == SCD_STATUS_OK) {
        double buy, delay, total;
        scd_trace_costs(trace, &buy, &delay, &total);
        printf("buy %.6f delay %.6f total %.6f\n", buy, delay, total);
    } else {
        fprintf(stderr, "run: %s\n", scd_last_error_message());
    }
    scd_trace_free(trace);
    scd_instance_free(inst);
    return st;
}
