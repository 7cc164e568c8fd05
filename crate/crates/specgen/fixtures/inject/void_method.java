package util;

public class Counter {

    private int count;

    /** Increments the counter. */
    public void increment() {
        this.count = this.count + 1;
    }

    public int count() {
        return this.count;
    }
}
