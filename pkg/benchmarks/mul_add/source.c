void fma_vec(int n, const int* x, const int* y, const int* w, int* z) {
    for (int i = 0; i < n; i++)
        z[i] = x[i] * y[i] + w[i];
}
