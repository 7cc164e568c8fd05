package toy;

public class MathOps {

    /**
     * Returns the absolute value of the argument.
     *
     * @param n any integer
     * @return the non-negative magnitude of {@code n}
     */
    public static int abs(int n) {
        return n < 0 ? -n : n;
    }
}
