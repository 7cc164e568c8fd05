package org.jfree.chart.plot;

import java.util.List;

public class CategoryPlot {

    private List items;

    /**
     * Returns the legend items for the plot.
     * @return The legend items.
     */
    public LegendItemCollection getLegendItems() {
        LegendItemCollection result = new LegendItemCollection(this.items);
        return result;
    }

    public List items() {
        return this.items;
    }
}
