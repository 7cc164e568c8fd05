package org.jfree.chart.plot;

import java.util.Arrays;

import java.util.List;

public class CategoryPlot {

    private List items;

    /**
     * Returns the legend items for the plot.
     * @return The legend items.
     */
    public LegendItemCollection getLegendItems_ToBeValidated() {
        LegendItemCollection result = new LegendItemCollection(this.items);
        return result;
    }

    public LegendItemCollection getLegendItems() {
        List oldItems = this.items();
        LegendItemCollection ret = getLegendItems_ToBeValidated();
        List retItems = ret.items();
        if (!(Arrays.deepEquals(oldItems.toArray(), retItems.toArray()))) { throw new IllegalStateException("SPEC_VIOLATION::golden::1"); }
        return ret;
    }

    public List items() {
        return this.items;
    }
}
