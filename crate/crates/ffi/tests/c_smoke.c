#include <stdio.h>
#include "blendscope.h"

int main(void) {
    double scores[4] = {0.9, 0.8, 0.3, 0.1};
    uint8_t labels[4] = {1, 0, 1, 0};
    double auc = 0.0;
    if (bs_auc(scores, labels, 4, &auc) != BS_STATUS_OK) return 1;
    if (auc != 0.75) return 2;

    double data[4] = {0.0, 0.5, 0.5, 1.0};
    BsPlane *mask = NULL, *boundary = NULL;
    if (bs_plane_new(2, 2, data, &mask) != BS_STATUS_OK) return 3;
    if (bs_boundary_mask(mask, &boundary) != BS_STATUS_OK) return 4;
    double out[4];
    if (bs_plane_copy(boundary, out, 4) != BS_STATUS_OK) return 5;
    if (out[1] != 1.0 || out[0] != 0.0) return 6;

    if (bs_auc(NULL, NULL, 4, &auc) != BS_STATUS_NULL_POINTER) return 7;
    char msg[64];
    if (bs_last_error_message(msg, sizeof msg) == 0) return 8;

    bs_plane_free(boundary);
    bs_plane_free(mask);
    printf("ok\n");
    return 0;
}
