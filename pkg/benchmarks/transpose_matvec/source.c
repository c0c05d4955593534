void atx(int n, int m, const int* A, const int* x, int* y) {
    for (int j = 0; j < m; j++)
        y[j] = 0;
    for (int i = 0; i < n; i++)
        for (int j = 0; j < m; j++)
            y[j] += A[i * m + j] * x[i];
}
