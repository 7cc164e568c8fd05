package util;

public class Counter {

    private int count;

    /** Increments the counter. */
    public void increment_ToBeValidated() {
        this.count = this.count + 1;
    }

    public void increment() {
        int oldCount = this.count;
        increment_ToBeValidated();
        if (!(this.count == oldCount + 1)) { throw new IllegalStateException("SPEC_VIOLATION::golden::1"); }
    }

    public int count() {
        return this.count;
    }
}
