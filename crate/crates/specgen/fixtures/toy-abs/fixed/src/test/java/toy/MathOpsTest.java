package toy;

/** Plain-main test driver; prints one PASS/FAIL line per check. */
public class MathOpsTest {

    private static int failures = 0;

    public static void main(String[] args) {
        check("absPositive", 5, 5);
        check("absNegative", -3, 3);
        System.exit(failures == 0 ? 0 : 1);
    }

    private static void check(String id, int input, int expected) {
        try {
            int actual = MathOps.abs(input);
            if (actual == expected) {
                System.out.println("PASS " + id);
            } else {
                System.out.println("FAIL " + id + ": expected " + expected + " but was " + actual);
                failures++;
            }
        } catch (RuntimeException e) {
            System.out.println("FAIL " + id + ": " + e);
            failures++;
        }
    }
}
