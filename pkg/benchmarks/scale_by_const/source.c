void scale(int n, int* x, int* y) {
    int i;
    for (i = 0; i < n; ++i) {
        y[i] = 3 * x[i];
    }
}
